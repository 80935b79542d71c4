#pragma once

// Configuration-driven runs: integrate, reduce-check, descend, minimax,
// stability, verify-all. Artifacts go to report.json, timing.json,
// trajectories/*.csv and candidates/*.json under the output directory.

#include "maggeo/io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace maggeo::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kInvalid = 2, kAbnormal = 3 };

/// Every recognised key with its default value.
Json default_config();

/// KEY=VALUE with a dotted KEY ("flow.step=0.02"). VALUE is parsed as JSON
/// when possible, otherwise taken as a string. Unknown keys are rejected.
void apply_override(Json& config, const std::string& assignment);

/// Defaults overlaid with `user`; rejects unknown keys and type mismatches.
Json merge_config(const Json& user);

struct RunConfig {
  std::string command;
  std::string model;
  int n = 1;  // torus flux quantum
  double k = 1.0;
  std::vector<double> k_grid;
  int N = 64;
  std::uint64_t seed = 7;
  double perturbation = 0.01;
  double duration = 10.0;
  double step = 1e-3;
  int record_every = 10;
  int stencil_order = 4;
  FlowConfig flow;
  PolishConfig polish;
  bool polish_enabled = true;
  MinimaxConfig minimax;
  int minimax_m = 16;
  int samples = 100;
  double fd_step = 1e-4;
  Json echo;  // merged configuration, written back into the report
};

/// Throws PreconditionError ("k must exceed 1/2", unknown model, ...).
RunConfig parse_run_config(const Json& merged);

struct RunResult {
  int exit_code = kOk;
  Json report;
  Json timing;
};

/// Dispatches on cfg.command and writes all artifacts under `out`.
/// Computational failures are reported in the result; invalid configurations
/// and unwritable directories throw.
RunResult run(const RunConfig& cfg, const std::filesystem::path& out);

/// Entry point shared by the executable and the tests.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace maggeo::cli
