#pragma once

// JSON loop snapshots, report serialization and CSV plot data.

#include "maggeo/flow.hpp"
#include "maggeo/minimax.hpp"
#include "maggeo/stability.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>

namespace maggeo {

using Json = nlohmann::ordered_json;

struct LoopSnapshot {
  std::string model;
  int flux = 1;  // torus flux quantum n
  ExtendedLoop loop;
};

/// {model, flux, N, T, phi, k, winding, samples}, samples as N rows of
/// ambient coordinates. Doubles are written with round-trip precision.
Json loop_snapshot(const BundleModel& bundle, const ExtendedLoop& x);

/// Throws PreconditionError on missing or inconsistent fields.
LoopSnapshot parse_loop_snapshot(const Json& j);

Json to_json(const CriticalResiduals& r);
Json to_json(const CurvatureStats& c);
Json to_json(const PolishReport& p);
Json to_json(const FlowOutcome& f, bool traces);
Json to_json(const MinimaxRecord& r);
Json to_json(const SweepResult& s);
Json to_json(const ResidualStats& r);
Json to_json(const ContactReport& r);
Json to_json(const Su2Report& r);

/// t, x, y[, z] of the projected loop, t = i T / N, closed by repeating the
/// first sample at t = T.
void write_base_curve_csv(std::ostream& out, const BundleModel& bundle, const ExtendedLoop& x);

}  // namespace maggeo
