#include "maggeo/cli.hpp"

#include "maggeo/dynamics.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace maggeo::cli {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kCommands = {"integrate", "reduce-check", "descend",
                                         "minimax",   "stability",    "verify-all"};

// Type-checks `user` against `defaults` key by key.
void overlay(Json& target, const Json& user, const std::string& prefix) {
  if (!user.is_object()) throw PreconditionError("config must be a JSON object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!target.contains(key)) throw PreconditionError("unknown config key '" + path + "'");
    Json& slot = target[key];
    if (slot.is_object()) {
      overlay(slot, value, path);
      continue;
    }
    const bool ok = slot.is_null()              ? (value.is_null() || value.is_number())
                    : slot.is_number_float()    ? value.is_number()
                    : slot.is_number_integer()  ? value.is_number_integer()
                    : slot.is_string()          ? value.is_string()
                    : slot.is_boolean()         ? value.is_boolean()
                    : slot.is_array()           ? value.is_array()
                                                : false;
    if (!ok) throw PreconditionError("config key '" + path + "' has the wrong type");
    if (slot.is_number_float() && value.is_number()) {
      slot = value.get<double>();
    } else {
      slot = value;
    }
  }
}

double num(const Json& j, const char* key) { return j.at(key).get<double>(); }
int integer(const Json& j, const char* key) { return j.at(key).get<int>(); }

void require(bool cond, const std::string& message) {
  if (!cond) throw PreconditionError(message);
}

// ---- seeded inputs ----

Vec random_point(const BundleModel& b, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  if (b.name() == "hopf") {
    Vec q(4);
    for (int i = 0; i < 4; ++i) q(i) = normal(rng);
    return q.normalized();
  }
  Vec q(3);
  for (int i = 0; i < 3; ++i) q(i) = angle(rng);
  return q;
}

// Cotangent state with A = 1 and H = k.
PhaseState random_state(const BundleModel& b, double k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const Vec q = random_point(b, rng);
  const Mat hb = b.horizontal_basis(q);
  Vec c(hb.cols());
  for (int i = 0; i < c.size(); ++i) c(i) = normal(rng);
  Vec h = hb * c;
  const Mat g = b.metric_at(q);
  h *= std::sqrt(2.0 * (k - 0.5) / h.dot(g * h));
  return {q, g * h + b.connection_at(q), Representation::Cotangent};
}

// Smooth periodic displacement with three Fourier modes, renormalised.
ExtendedLoop perturb(const BundleModel& b, ExtendedLoop x, double amp, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const int d = static_cast<int>(x.samples.rows()), n = x.size();
  for (int m = 1; m <= 3; ++m) {
    Vec a(d), s(d);
    for (int c = 0; c < d; ++c) {
      a(c) = normal(rng) * amp / m;
      s(c) = normal(rng) * amp / m;
    }
    for (int i = 0; i < n; ++i) {
      const double w = kTwoPi * m * i / n;
      x.samples.col(i) += std::cos(w) * a + std::sin(w) * s;
    }
  }
  for (int i = 0; i < n; ++i) x.samples.col(i) = b.normalize(Vec(x.samples.col(i)));
  return x;
}

struct Oracle {
  ExtendedLoop loop;
  double period = 0.0;
  double curvature = 0.0;
};

// Closed magnetic circle of energy kbar lifted to a critical point of S_k.
Oracle oracle_orbit(const BundleModel& b, double k, int n) {
  const double kbar = k - 0.5, speed = std::sqrt(2.0 * kbar);
  Vec q0, v0;
  double period = 0.0, strength = 0.0;
  if (const auto* t = dynamic_cast<const FlatTorusBundle*>(&b)) {
    strength = t->field_strength();
    q0 = Vec::Constant(2, 0.5);
    v0 = Vec::Zero(2);
    v0(0) = speed;
    period = kTwoPi / strength;
  } else {
    strength = 2.0;  // S^2(1/2) with total flux 2 pi
    const double r = 0.5, alpha = std::atan(speed / (strength * r));
    q0 = Vec::Zero(3);
    q0 << r * std::sin(alpha), 0.0, r * std::cos(alpha);
    v0 = Vec::Zero(3);
    v0(1) = speed;
    period = kTwoPi * r * std::sin(alpha) / speed;
  }
  const LiftedOrbit o = lift_orbit(b, q0, v0, period, n, std::min(1e-3, period / 4000.0));
  return {loop_from_orbit(o), period, strength / speed};
}

// ---- report pieces ----

Json orbit_entry(const BundleModel& b, const ExtendedLoop& x, const std::string& name,
                 const fs::path& out) {
  const Json snap = loop_snapshot(b, x);
  const std::string snap_file = "candidates/" + name + ".json";
  const std::string csv_file = "trajectories/" + name + "_base.csv";
  {
    std::ofstream f(out / snap_file);
    if (!f) throw PreconditionError("cannot write " + (out / snap_file).string());
    f << snap.dump(2) << '\n';
  }
  {
    std::ofstream f(out / csv_file);
    if (!f) throw PreconditionError("cannot write " + (out / csv_file).string());
    write_base_curve_csv(f, b, x);
  }
  Json j;
  j["name"] = name;
  j["snapshot"] = snap_file;
  j["base_curve"] = csv_file;
  j["T"] = x.T;
  j["phi"] = x.phi;
  j["action"] = action_eval(b, x);
  j["critical_residuals"] = to_json(critical_residuals(b, x));
  j["curvature"] = to_json(loop_geodesic_curvature(b, x));
  return j;
}

void write_csv(const fs::path& path, const Trajectory& tr) {
  std::ofstream f(path);
  if (!f) throw PreconditionError("cannot write " + path.string());
  write_trajectory_csv(f, tr);
}

Json suite(const std::string& name, double value, double tol, bool pass) {
  return {{"name", name}, {"value", value}, {"tolerance", tol}, {"pass", pass}};
}

// ---- commands ----

Json cmd_integrate(const RunConfig& c, const BundleModel& b, const fs::path& out) {
  std::mt19937_64 rng(c.seed);
  const PhaseState s0 = random_state(b, c.k, rng);
  const Trajectory lifted = integrate_lifted_geodesic(b, s0, c.duration, c.step, c.record_every);
  const ReducedState r = reduction_map(b, s0.position, s0.vector, 1.0, 1e-8);
  const Trajectory base =
      integrate_magnetic(b.base(), r.point, r.velocity, c.duration, c.step, c.record_every);
  write_csv(out / "trajectories/lifted.csv", lifted);
  write_csv(out / "trajectories/base.csv", base);
  Json j;
  j["initial_state"] = {{"q", std::vector<double>(s0.position.begin(), s0.position.end())},
                        {"p", std::vector<double>(s0.vector.begin(), s0.vector.end())}};
  j["kbar"] = c.k - 0.5;
  j["lifted"] = {{"samples", lifted.size()},
                 {"H_drift", lifted.drift("H")},
                 {"A_drift", lifted.drift("A")},
                 {"csv", "trajectories/lifted.csv"}};
  j["base"] = {{"samples", base.size()},
               {"energy_drift", base.drift("energy")},
               {"csv", "trajectories/base.csv"}};
  return j;
}

Json cmd_reduce_check(const RunConfig& c, const BundleModel& b) {
  std::mt19937_64 rng(c.seed);
  const PhaseState s0 = random_state(b, c.k, rng);
  const ReductionComparison fine = compare_reduction(b, s0, c.duration, c.step);
  const double e1 = compare_reduction(b, s0, c.duration, 0.2).sup_distance;
  const double e2 = compare_reduction(b, s0, c.duration, 0.1).sup_distance;
  Json j;
  j["duration"] = c.duration;
  j["step"] = c.step;
  j["sup_distance"] = fine.sup_distance;
  j["reduced_energy"] = fine.reduced_energy;
  j["coarse_errors"] = {{"step_0.2", e1}, {"step_0.1", e2}};
  j["observed_order"] = (e1 > 0.0 && e2 > 0.0) ? std::log2(e1 / e2) : 0.0;
  j["pass"] = fine.sup_distance < 1e-6;
  return j;
}

Json cmd_descend(const RunConfig& c, const BundleModel& b, const fs::path& out, Json& orbits,
                 int& exit_code) {
  std::mt19937_64 rng(c.seed);
  const Oracle o = oracle_orbit(b, c.k, c.N);
  ExtendedLoop x0 = perturb(b, o.loop, c.perturbation, rng);
  x0.T *= 1.0 + c.perturbation;
  x0.phi += 5.0 * c.perturbation;
  const DescendResult r =
      descend(b, x0, c.flow,
              c.polish_enabled ? std::optional<PolishConfig>(c.polish) : std::nullopt);
  Json j;
  j["status"] = to_string(r.status);
  j["flow"] = to_json(r.flow, false);
  j["polish"] = r.polish ? to_json(*r.polish) : Json(nullptr);
  j["expected_period"] = o.period;
  j["expected_curvature"] = o.curvature;
  j["period"] = r.candidate.T;
  j["period_error"] = std::abs(r.candidate.T - o.period);
  const CurvatureStats kappa = loop_geodesic_curvature(b, r.candidate);
  j["radius"] = kappa.mean > 0.0 ? 1.0 / kappa.mean : 0.0;
  j["expected_radius"] = 1.0 / o.curvature;
  j["curvature_error"] = std::abs(kappa.mean - o.curvature);
  orbits.push_back(orbit_entry(b, r.candidate, "descend", out));
  if (r.status == FlowStatus::Abnormal) exit_code = kAbnormal;
  return j;
}

Json cmd_minimax(const RunConfig& c, const fs::path& out, Json& orbits) {
  const HopfSphereBundle hopf;
  const SweepResult s = struwe_sweep(hopf, c.k_grid, c.minimax_m, c.N, c.minimax);
  Json j = to_json(s);
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    if (!s.records[i].candidate) continue;
    std::ostringstream name;
    name << "minimax_" << i;
    Json e = orbit_entry(hopf, s.records[i].candidate->loop, name.str(), out);
    e["k"] = s.records[i].k;
    e["status"] = s.records[i].candidate->status;
    e["expected_curvature"] = s.records[i].candidate->expected_curvature;
    orbits.push_back(std::move(e));
  }
  return j;
}

Json cmd_stability(const RunConfig& c) {
  Json j = Json::array();
  j.push_back(to_json(torus_contact_scan(c.k, c.samples, c.seed, c.n, c.fd_step)));
  j.push_back(to_json(su2_scan(c.k - 0.5, c.samples, c.seed, c.fd_step)));
  return j;
}

ExtendedLoop random_loop(const BundleModel& b, double k, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 3.0);
  std::uniform_int_distribution<int> a(-2, 2);
  ExtendedLoop x = fiberwise_rotation(b, random_point(b, rng), a(rng), u(rng), k, n);
  x = perturb(b, x, 0.3, rng);
  x.phi += u(rng) - 1.75;
  return x;
}

Eigen::MatrixXd random_tangent(const BundleModel& b, const ExtendedLoop& x,
                               std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd xi(x.samples.rows(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    const Mat tb = b.tangent_basis(x.samples.col(i));
    Vec c(tb.cols());
    for (int a = 0; a < c.size(); ++a) c(a) = normal(rng);
    xi.col(i) = tb * c;
  }
  return xi;
}

Json cmd_verify_all(const RunConfig& c, const BundleModel& b, const fs::path& out, Json& orbits,
                    int& exit_code) {
  std::mt19937_64 rng(c.seed);
  Json suites = Json::array();

  {  // analytic vs central-difference directional derivatives
    double worst = 0.0;
    std::normal_distribution<double> normal;
    for (int t = 0; t < 20; ++t) {
      const ExtendedLoop x = random_loop(b, c.k, 16 + 8 * (t % 3), rng);
      const Eigen::MatrixXd xi = random_tangent(b, x, rng);
      const double tau = normal(rng), psi = normal(rng), h = 1e-4;
      const auto at = [&](double e) {
        ExtendedLoop y = x;
        y.samples += e * xi;
        y.T += e * tau;
        y.phi += e * psi;
        return action_eval(b, y);
      };
      // five-point central stencil
      const double fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      const double an = pairing(action_differential(b, x), xi, tau, psi);
      worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-300}));
    }
    suites.push_back(suite("gradient", worst, 1e-6, worst < 1e-6));
  }
  {  // conservation of H and A
    const PhaseState s0 = random_state(b, c.k, rng);
    const Trajectory tr = integrate_lifted_geodesic(b, s0, 10.0, 1e-3, 50);
    const double d = std::max(tr.drift("H"), tr.drift("A"));
    suites.push_back(suite("conservation", d, 1e-8, d < 1e-8));
  }
  {  // reduction equivalence
    const PhaseState s0 = random_state(b, c.k, rng);
    const double d = compare_reduction(b, s0, 10.0, 1e-3).sup_distance;
    suites.push_back(suite("reduction", d, 1e-6, d < 1e-6));
  }
  {  // Heisenberg shift by grid-aligned s; on S^3 only u = 0 is exact
    const bool flat = b.name() == "torus";
    double worst = 0.0;
    std::uniform_int_distribution<int> shift(0, 31), wind(-2, 2);
    std::uniform_real_distribution<double> r(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
      const ExtendedLoop x = random_loop(b, c.k, 32, rng);
      const int u = flat ? wind(rng) : 0;
      const ExtendedLoop y = heisenberg_act(b, x, r(rng), shift(rng) / 32.0, u);
      worst = std::max(worst, std::abs(action_eval(b, y) - action_eval(b, x) - kTwoPi * u));
    }
    suites.push_back(suite("heisenberg", worst, 1e-12, worst < 1e-12));
    if (!flat) {
      // u != 0: the error must fall at least fourfold per doubling of N
      const std::mt19937_64 shape = rng;
      double prev = 0.0, ratio = 1e300;
      for (int n : {64, 128, 256}) {
        std::mt19937_64 g = shape;
        const ExtendedLoop x = random_loop(b, c.k, n, g);
        const double err =
            std::abs(action_eval(b, heisenberg_act(b, x, 0.3, 0.0, -2)) - action_eval(b, x) +
                     2.0 * kTwoPi);
        if (prev > 0.0) ratio = std::min(ratio, prev / err);
        prev = err;
      }
      suites.push_back(suite("heisenberg_winding_order", ratio, 4.0, ratio >= 4.0));
    }
  }
  {  // Legendre identity
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const ExtendedLoop x = random_loop(b, c.k, 32, rng);
      worst = std::max(worst, std::abs(rabinowitz_eval(b, legendre_lift(b, x), x) -
                                       action_eval(b, x)));
    }
    suites.push_back(suite("legendre", worst, 1e-10, worst < 1e-10));
  }
  {  // truncation in the guard set of a fiberwise rotation
    FlowConfig cfg = c.flow;
    int wrong = 0;
    double worst = 0.0;
    for (int a : {1, 2, -1}) {
      const ExtendedLoop f =
          fiberwise_rotation(b, random_point(b, rng), a, flow_T0(cfg, c.k) / 2.0, c.k, 64);
      if (b.name() == "torus") {
        worst = std::max(worst, std::abs(action_eval(b, f) - (-kTwoPi * a + c.k * f.T)));
      }
      const FlowOutcome o = evolve(b, perturb(b, f, 1e-4, rng), cfg);
      if (o.status != FlowStatus::Truncated || o.truncation_index != a) ++wrong;
    }
    suites.push_back(suite("truncation", wrong + worst, 1e-12, wrong == 0 && worst <= 1e-12));
  }
  {  // descent from a perturbed oracle orbit
    const Oracle o = oracle_orbit(b, c.k, 64);
    ExtendedLoop x0 = perturb(b, o.loop, 0.01, rng);
    x0.T *= 1.01;
    FlowConfig cfg = c.flow;
    cfg.max_steps = std::min(cfg.max_steps, 100);
    const DescendResult r = descend(b, x0, cfg, c.polish);
    const double res = r.residuals.max();
    const bool pass = r.status == FlowStatus::Critical && res < 1e-4 &&
                      std::abs(r.candidate.T - o.period) < 1e-4 * o.period;
    suites.push_back(suite("descend", res, 1e-4, pass));
    orbits.push_back(orbit_entry(b, r.candidate, "verify_descend", out));
  }
  {  // stability identities
    const ContactReport t = torus_contact_scan(c.k, 50, c.seed);
    const Su2Report s = su2_scan(c.k - 0.5, 100, c.seed);
    const double row = std::max(t.first_row.max, s.first_row.max);
    suites.push_back(suite("stability_first_row", row, 1e-12, row < 1e-12));
    suites.push_back(suite("su2_determinant", s.det_error.max, 1e-8, s.det_error.max < 1e-8));
    suites.push_back(suite("torus_contact", t.min_abs_det, 0.0, t.min_abs_det > 0.0));
  }
  bool all = true;
  for (const auto& s : suites) all = all && s["pass"].get<bool>();
  if (!all) exit_code = kAbnormal;
  return {{"all_pass", all}, {"suites", suites}};
}

struct StencilGuard {
  int saved = stencil_order();
  ~StencilGuard() { set_stencil_order(saved); }
};

}  // namespace

Json default_config() {
  Json j;
  j["command"] = "verify-all";
  j["model"] = "torus";
  j["n"] = 1;
  j["k"] = 1.0;
  j["k_grid"] = {0.6, 0.8, 1.0, 1.5, 2.0};
  j["N"] = 64;
  j["seed"] = 7;
  j["perturbation"] = 0.01;
  j["duration"] = 10.0;
  j["step"] = 1e-3;
  j["record_every"] = 10;
  j["stencil_order"] = 4;
  const FlowConfig f;
  j["flow"] = {{"delta", f.delta},
               {"epsilon", nullptr},
               {"T0", nullptr},
               {"step", f.step},
               {"grad_tol", f.grad_tol},
               {"max_steps", 200},
               {"T_min", f.T_min},
               {"metric", "H1"},
               {"parameter_weight", f.parameter_weight},
               {"max_halvings", f.max_halvings}};
  const PolishConfig p;
  j["polish"] = {{"enabled", true},
                 {"max_iterations", p.max_iterations},
                 {"tol", p.tol},
                 {"fd_step", p.fd_step}};
  const MinimaxConfig m;
  j["minimax"] = {{"m", 16},
                  {"threads", m.threads},
                  {"delta", m.flow.delta},
                  {"step", m.flow.step},
                  {"max_steps", m.flow.max_steps},
                  {"parameter_weight", m.flow.parameter_weight},
                  {"stagnation_grad", m.stagnation_grad}};
  j["stability"] = {{"samples", 100}, {"fd_step", 1e-4}};
  return j;
}

Json merge_config(const Json& user) {
  Json j = default_config();
  overlay(j, user, "");
  return j;
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw PreconditionError("override must be KEY=VALUE: '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  // rebuild as a nested object and overlay, so type checks apply
  Json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
    parts.push_back(rest.substr(0, pos));
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    Json wrap;
    wrap[*it] = std::move(patch);
    patch = std::move(wrap);
  }
  Json defaults = default_config();
  overlay(defaults, patch, "");  // key and type check against the schema
  overlay(config, patch, "");
}

RunConfig parse_run_config(const Json& j) {
  RunConfig c;
  c.echo = j;
  c.command = j.at("command").get<std::string>();
  require(kCommands.count(c.command) > 0, "unknown command '" + c.command + "'");
  c.model = j.at("model").get<std::string>();
  require(c.model == "torus" || c.model == "hopf", "unknown model '" + c.model + "'");
  c.n = integer(j, "n");
  require(c.n >= 1, "n must be a positive integer");
  c.k = num(j, "k");
  require(c.k > 0.5, "k must exceed 1/2");
  c.k_grid = j.at("k_grid").get<std::vector<double>>();
  if (c.command == "minimax") {
    require(!c.k_grid.empty(), "k_grid must not be empty");
    for (double k : c.k_grid) require(k > 0.5, "k must exceed 1/2");
    require(c.model == "hopf", "minimax requires model hopf");
  }
  c.N = integer(j, "N");
  require(c.N >= 8, "N must be at least 8");
  const auto seed = j.at("seed").get<std::int64_t>();
  require(seed >= 0, "seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.perturbation = num(j, "perturbation");
  require(c.perturbation >= 0.0 && c.perturbation < 0.5, "perturbation must lie in [0, 0.5)");
  c.duration = num(j, "duration");
  c.step = num(j, "step");
  require(c.duration > 0.0 && c.step > 0.0, "duration and step must be positive");
  c.record_every = integer(j, "record_every");
  require(c.record_every >= 1, "record_every must be at least 1");
  c.stencil_order = integer(j, "stencil_order");
  require(c.stencil_order == 2 || c.stencil_order == 4, "stencil_order must be 2 or 4");

  const Json& f = j.at("flow");
  c.flow.delta = num(f, "delta");
  if (!f.at("epsilon").is_null()) c.flow.epsilon = num(f, "epsilon");
  if (!f.at("T0").is_null()) c.flow.T0 = num(f, "T0");
  c.flow.step = num(f, "step");
  c.flow.grad_tol = num(f, "grad_tol");
  c.flow.max_steps = integer(f, "max_steps");
  c.flow.T_min = num(f, "T_min");
  const std::string metric = f.at("metric").get<std::string>();
  require(metric == "H1" || metric == "L2", "flow.metric must be H1 or L2");
  c.flow.metric = metric == "H1" ? GradientMetric::H1 : GradientMetric::L2;
  c.flow.parameter_weight = num(f, "parameter_weight");
  c.flow.max_halvings = integer(f, "max_halvings");
  require(c.flow.max_steps >= 0, "flow.max_steps must be non-negative");
  validate_flow_config(c.flow, c.k);

  const Json& p = j.at("polish");
  c.polish.max_iterations = integer(p, "max_iterations");
  c.polish.tol = num(p, "tol");
  c.polish.fd_step = num(p, "fd_step");

  const Json& m = j.at("minimax");
  c.minimax_m = integer(m, "m");
  require(c.minimax_m >= 8, "minimax.m must be at least 8");
  c.minimax.threads = integer(m, "threads");
  require(c.minimax.threads >= 0, "minimax.threads must be non-negative");
  c.minimax.flow.delta = num(m, "delta");
  c.minimax.flow.step = num(m, "step");
  c.minimax.flow.max_steps = integer(m, "max_steps");
  c.minimax.flow.parameter_weight = num(m, "parameter_weight");
  c.minimax.stagnation_grad = num(m, "stagnation_grad");
  c.minimax.polish = c.polish;
  for (double k : c.k_grid) {
    if (k > 0.5) validate_flow_config(c.minimax.flow, k);
  }

  const Json& s = j.at("stability");
  c.samples = integer(s, "samples");
  require(c.samples >= 1, "stability.samples must be at least 1");
  c.fd_step = num(s, "fd_step");
  require(c.fd_step > 0.0, "stability.fd_step must be positive");
  c.polish_enabled = p.at("enabled").get<bool>();
  return c;
}

RunResult run(const RunConfig& c, const fs::path& out) {
  try {
    fs::create_directories(out / "trajectories");
    fs::create_directories(out / "candidates");
  } catch (const fs::filesystem_error& e) {
    throw PreconditionError("cannot create output directory '" + out.string() + "'");
  }
  const StencilGuard guard;
  set_stencil_order(c.stencil_order);
  const auto bundle = make_bundle(c.model, c.n);
  const auto start = std::chrono::steady_clock::now();

  RunResult result;
  Json orbits = Json::array();
  Json summary;
  std::string status = "ok", message;
  try {
    if (c.command == "integrate") {
      summary = cmd_integrate(c, *bundle, out);
    } else if (c.command == "reduce-check") {
      summary = cmd_reduce_check(c, *bundle);
    } else if (c.command == "descend") {
      summary = cmd_descend(c, *bundle, out, orbits, result.exit_code);
    } else if (c.command == "minimax") {
      summary = cmd_minimax(c, out, orbits);
    } else if (c.command == "stability") {
      summary = cmd_stability(c);
    } else {
      summary = cmd_verify_all(c, *bundle, out, orbits, result.exit_code);
    }
  } catch (const GeometryError& e) {
    result.exit_code = kAbnormal;
    message = e.what();
  }
  if (result.exit_code == kAbnormal) status = "abnormal";

  Json& r = result.report;
  r["format"] = "maggeo-report/1";
  r["command"] = c.command;
  r["status"] = status;
  r["message"] = message;
  r["config"] = c.echo;
  r["summary"] = summary;
  r["orbits"] = orbits;

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.timing = {{"command", c.command}, {"seconds", seconds}};

  std::ofstream rf(out / "report.json");
  if (!rf) throw PreconditionError("cannot write " + (out / "report.json").string());
  rf << r.dump(2) << '\n';
  std::ofstream tf(out / "timing.json");
  if (!tf) throw PreconditionError("cannot write " + (out / "timing.json").string());
  tf << result.timing.dump(2) << '\n';
  return result;
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed magnetic geodesics by variational flows on circle bundles"};
  std::string command, config_path, out_dir = "out";
  std::optional<std::int64_t> seed;
  std::vector<std::string> overrides;
  app.add_option("command", command,
                 "integrate | reduce-check | descend | minimax | stability | verify-all");
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--override", overrides, "KEY=VALUE, dotted keys reach nested fields")
      ->take_all();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalid;
  }

  Json config;
  try {
    Json user = Json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw PreconditionError("cannot read config '" + config_path + "'");
      user = Json::parse(f, nullptr, false);
      if (user.is_discarded()) throw PreconditionError("config is not valid JSON");
    }
    config = merge_config(user);
    if (!command.empty()) config["command"] = command;
    if (seed) config["seed"] = *seed;
    for (const auto& o : overrides) apply_override(config, o);
    const RunConfig cfg = parse_run_config(config);
    const RunResult r = run(cfg, out_dir);
    out << cfg.command << ": " << r.report["status"].get<std::string>() << " -> "
        << (fs::path(out_dir) / "report.json").string() << '\n';
    if (r.exit_code != kOk && !r.report["message"].get<std::string>().empty())
      err << "error: " << r.report["message"].get<std::string>() << '\n';
    return r.exit_code;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace maggeo::cli
