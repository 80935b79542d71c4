#include "maggeo/io.hpp"

#include <iomanip>
#include <ostream>

namespace maggeo {

Json loop_snapshot(const BundleModel& bundle, const ExtendedLoop& x) {
  Json j;
  j["model"] = bundle.name();
  const auto* torus = dynamic_cast<const FlatTorusBundle*>(&bundle);
  j["flux"] = torus ? torus->flux_quantum() : 1;
  j["N"] = x.size();
  j["T"] = x.T;
  j["phi"] = x.phi;
  j["k"] = x.k;
  j["winding"] = {x.winding[0], x.winding[1], x.winding[2]};
  Json rows = Json::array();
  for (int i = 0; i < x.size(); ++i) {
    Json row = Json::array();
    for (int a = 0; a < x.samples.rows(); ++a) row.push_back(x.samples(a, i));
    rows.push_back(std::move(row));
  }
  j["samples"] = std::move(rows);
  return j;
}

LoopSnapshot parse_loop_snapshot(const Json& j) {
  LoopSnapshot s;
  try {
    s.model = j.at("model").get<std::string>();
    s.flux = j.value("flux", 1);
    const int n = j.at("N").get<int>();
    s.loop.T = j.at("T").get<double>();
    s.loop.phi = j.at("phi").get<double>();
    s.loop.k = j.at("k").get<double>();
    const auto& w = j.at("winding");
    if (w.size() != 3) throw PreconditionError("snapshot winding must have 3 entries");
    for (int a = 0; a < 3; ++a) s.loop.winding[a] = w.at(a).get<std::int64_t>();
    const auto& rows = j.at("samples");
    if (static_cast<int>(rows.size()) != n) throw PreconditionError("snapshot N does not match samples");
    if (n == 0) throw PreconditionError("snapshot has no samples");
    const int dim = static_cast<int>(rows.at(0).size());
    s.loop.samples.resize(dim, n);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows.at(i).size()) != dim)
        throw PreconditionError("snapshot rows differ in length");
      for (int a = 0; a < dim; ++a) s.loop.samples(a, i) = rows.at(i).at(a).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("malformed loop snapshot: ") + e.what());
  }
  return s;
}

Json to_json(const CriticalResiduals& r) {
  return {{"fiber_speed", r.fiber_speed},
          {"energy_density", r.energy_density},
          {"magnetic_ode", r.magnetic_ode},
          {"base_energy", r.base_energy},
          {"max", r.max()}};
}

Json to_json(const CurvatureStats& c) {
  return {{"mean", c.mean}, {"min", c.min}, {"max", c.max}};
}

Json to_json(const PolishReport& p) {
  return {{"converged", p.converged}, {"iterations", p.iterations}, {"grad_norm", p.grad_norm},
          {"dT", p.dT},           {"dphi", p.dphi},             {"message", p.message}};
}

Json to_json(const FlowOutcome& f, bool traces) {
  Json j;
  j["status"] = to_string(f.status);
  j["steps"] = f.steps;
  j["truncation_index"] = f.truncation_index ? Json(*f.truncation_index) : Json(nullptr);
  j["message"] = f.message;
  j["final_action"] = f.action_trace.empty() ? 0.0 : f.action_trace.back();
  j["final_grad_norm"] = f.grad_trace.empty() ? 0.0 : f.grad_trace.back();
  if (traces) {
    j["action_trace"] = f.action_trace;
    j["grad_trace"] = f.grad_trace;
    j["period_trace"] = f.period_trace;
  }
  return j;
}

Json to_json(const MinimaxRecord& r) {
  Json j;
  j["k"] = r.k;
  j["m"] = r.m;
  j["N"] = r.n;
  j["epsilon"] = r.epsilon;
  j["T0"] = r.T0;
  j["initial_max"] = r.initial_max;
  j["c_estimate"] = r.c_estimate;
  j["selection_step"] = r.selection_step;
  j["selection_grad"] = r.selection_grad;
  j["argmax_node"] = r.argmax_node;
  j["argmax_history"] = r.argmax_trace;
  j["max_trace"] = r.max_trace;
  j["near_max_nodes"] = r.near_max_nodes;
  j["near_max_unguarded"] = r.near_max_unguarded;
  j["truncated_nodes"] = r.truncated_nodes;
  j["critical_nodes"] = r.critical_nodes;
  j["abnormal_nodes"] = r.abnormal_nodes;
  j["stagnated"] = r.stagnated;
  if (r.candidate) {
    const MinimaxCandidate& c = *r.candidate;
    Json cj;
    cj["node"] = c.node;
    cj["status"] = c.status;
    cj["T"] = c.loop.T;
    cj["phi"] = c.loop.phi;
    cj["action"] = c.action;
    cj["grad_norm_before_polish"] = c.grad_norm;
    cj["polish"] = c.polish ? to_json(*c.polish) : Json(nullptr);
    cj["residuals"] = to_json(c.residuals);
    cj["curvature"] = to_json(c.curvature);
    cj["expected_curvature"] = c.expected_curvature;
    j["candidate"] = std::move(cj);
  } else {
    j["candidate"] = nullptr;
  }
  return j;
}

Json to_json(const SweepResult& s) {
  Json j;
  Json recs = Json::array();
  for (const auto& r : s.records) recs.push_back(to_json(r));
  j["records"] = std::move(recs);
  j["monotone"] = s.monotone;
  j["slopes"] = s.slopes;
  j["flagged"] = s.flagged;
  j["period_window"] = s.period_window;
  return j;
}

Json to_json(const ResidualStats& r) {
  return {{"max", r.max}, {"mean", r.mean}, {"count", r.count}};
}

Json to_json(const ContactReport& r) {
  Json j;
  j["model"] = r.model;
  j["k"] = r.k;
  j["samples"] = r.samples;
  j["min_abs_det"] = r.min_abs_det;
  j["residual_stats"] = {{"first_row", to_json(r.first_row)},
                         {"membership", to_json(r.membership)},
                         {"dalpha1_minus_omega", to_json(r.dalpha_minus_omega)},
                         {"kernel", to_json(r.kernel)},
                         {"pullback", to_json(r.pullback)}};
  j["first_betti"] = r.first_betti;
  return j;
}

Json to_json(const Su2Report& r) {
  Json j;
  j["model"] = "su2";
  j["k"] = r.kbar + 0.5;
  j["samples"] = r.samples;
  j["min_abs_det"] = r.min_abs_det;
  j["residual_stats"] = {{"det_minus_2k_minus_1", to_json(r.det_error)},
                         {"first_row", to_json(r.first_row)},
                         {"alpha1_X0", to_json(r.alpha1_X0)},
                         {"alpha1_X1", to_json(r.alpha1_X1)},
                         {"dalpha1_X0", to_json(r.dalpha1_X0)},
                         {"membership", to_json(r.membership)}};
  j["first_betti"] = r.first_betti;
  return j;
}

void write_base_curve_csv(std::ostream& out, const BundleModel& bundle, const ExtendedLoop& x) {
  const int n = x.size();
  const int dim = bundle.base().ambient_dim();
  const char* names[] = {"x", "y", "z"};
  out << "t";
  for (int a = 0; a < dim; ++a) out << ',' << names[a];
  out << '\n' << std::setprecision(17);
  for (int i = 0; i <= n; ++i) {
    const Vec q = bundle.project(x.samples.col(i % n));
    out << x.T * i / n;
    for (int a = 0; a < dim; ++a) out << ',' << q(a);
    out << '\n';
  }
}

}  // namespace maggeo
