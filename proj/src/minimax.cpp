#include "maggeo/minimax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace maggeo {

LoopFamily build_family(const HopfSphereBundle& hopf, int m, double k, int n, double T0) {
  if (m < 8) throw PreconditionError("family resolution m must be at least 8");
  if (n < 8) throw PreconditionError("loop resolution N must be at least 8");
  if (!(k > 0.5)) throw PreconditionError("k must exceed 1/2");
  if (!(T0 > 0.0)) throw PreconditionError("T0 must be positive");
  LoopFamily f;
  f.m = m;
  f.k = k;
  f.T0 = T0;
  f.disk.resize(2, m * m);
  for (int i = 0; i < m; ++i) {
    const double rho = static_cast<double>(i) / (m - 1);
    const bool edge = i == m - 1;
    const double r = edge ? 0.0 : std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (int j = 0; j < m; ++j) {
      const double psi = kTwoPi * j / m;
      const Eigen::Vector2d w(rho * std::cos(psi), rho * std::sin(psi));
      f.disk.col(i * m + j) = w;
      ExtendedLoop x;
      x.samples.resize(4, n);
      for (int s = 0; s < n; ++s) {
        const double t = kTwoPi * s / n;
        Vec q(4);
        q << w(0), w(1), r * std::cos(t), -r * std::sin(t);
        x.samples.col(s) = hopf.normalize(q);
      }
      x.T = T0;
      x.phi = 0.0;
      x.k = k;
      f.nodes.push_back(std::move(x));
      f.boundary.push_back(edge);
    }
  }
  return f;
}

void validate_family(const BundleModel& bundle, const LoopFamily& family) {
  bool sweeps = false;
  for (int i = 0; i < family.size(); ++i) {
    const ExtendedLoop& x = family.nodes[i];
    if (x.k != family.k) throw PreconditionError("family nodes must share k");
    if (family.boundary[i]) {
      const bool constant = (x.samples.colwise() - x.samples.col(0)).cwiseAbs().maxCoeff() == 0.0;
      if (!constant || x.phi != 0.0 || x.T > family.T0 || !(x.T > 0.0))
        throw PreconditionError("boundary node violates the pinning invariant");
    } else if (loop_energy(bundle, x) > 0.0) {
      sweeps = true;
    }
  }
  if (!sweeps) throw PreconditionError("family has no non-constant loop; not a sweepout");
}

namespace {

template <class F>
void parallel_for(int count, int threads, F&& body) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += threads) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

MinimaxRecord family_minimax_descent(const HopfSphereBundle& hopf, const LoopFamily& family,
                                     const MinimaxConfig& cfg) {
  validate_family(hopf, family);
  validate_flow_config(cfg.flow, family.k);

  MinimaxRecord rec;
  rec.k = family.k;
  rec.m = family.m;
  rec.n = family.nodes.front().size();
  rec.epsilon = flow_epsilon(cfg.flow, family.k);
  rec.T0 = family.T0;

  std::vector<int> interior;
  for (int i = 0; i < family.size(); ++i) {
    if (!family.boundary[i]) interior.push_back(i);
  }
  std::vector<FlowRun> runs(family.size());
  for (int i : interior) runs[i] = flow_start(hopf, family.nodes[i], cfg.flow);
  std::vector<double> current(family.size());
  for (int i = 0; i < family.size(); ++i) {
    if (family.boundary[i]) current[i] = action_eval(hopf, family.nodes[i]);
  }

  // states as evaluated at the current step (run.x advances past them)
  std::vector<ExtendedLoop> evaluated = family.nodes;
  std::vector<ExtendedLoop> selected;
  double best_grad = std::numeric_limits<double>::infinity();
  for (int step = 0;; ++step) {
    parallel_for(static_cast<int>(interior.size()), cfg.threads, [&](int j) {
      FlowRun& run = runs[interior[j]];
      if (run.done) return;
      evaluated[interior[j]] = run.x;
      flow_advance(hopf, run, cfg.flow);
      current[interior[j]] = run.out.action_trace.back();
    });
    const auto it = std::max_element(current.begin(), current.end());
    const int top = static_cast<int>(it - current.begin());
    rec.max_trace.push_back(*it);
    rec.argmax_trace.push_back(top);
    double g = std::numeric_limits<double>::infinity();
    if (!family.boundary[top]) g = runs[top].out.grad_trace.back();
    rec.top_grad_trace.push_back(g);
    if (g < best_grad && !guard_membership(hopf, evaluated[top], cfg.flow.delta)) {
      best_grad = g;
      rec.selection_step = step;
      selected = evaluated;
    }
    const bool all_done =
        std::all_of(interior.begin(), interior.end(), [&](int i) { return runs[i].done; });
    if (all_done) break;
  }
  rec.initial_max = rec.max_trace.front();
  if (selected.empty()) {
    rec.selection_step = static_cast<int>(rec.max_trace.size()) - 1;
    selected = evaluated;
  }
  rec.selection_grad = best_grad;
  rec.c_estimate = *std::min_element(rec.max_trace.begin(),
                                     rec.max_trace.begin() + rec.selection_step + 1);
  rec.argmax_node = rec.argmax_trace[rec.selection_step];

  const double level = rec.max_trace[rec.selection_step];
  for (int i = 0; i < family.size(); ++i) {
    if (action_eval(hopf, selected[i]) < level - rec.epsilon / 2.0) continue;
    rec.near_max_nodes.push_back(i);
    if (guard_membership(hopf, selected[i], cfg.flow.delta)) rec.near_max_unguarded = false;
  }
  for (int i : interior) {
    switch (runs[i].out.status) {
      case FlowStatus::Truncated: ++rec.truncated_nodes; break;
      case FlowStatus::Critical: ++rec.critical_nodes; break;
      case FlowStatus::Abnormal: ++rec.abnormal_nodes; break;
      default: break;
    }
  }
  if (cfg.enforce_lower_bound && rec.c_estimate < rec.epsilon)
    throw GeometryError("minimax estimate fell below the lower bound epsilon");

  if (!family.boundary[rec.argmax_node]) {
    MinimaxCandidate cand;
    cand.node = rec.argmax_node;
    cand.loop = selected[rec.argmax_node];
    cand.grad_norm = rec.selection_grad;
    rec.stagnated = cand.grad_norm < cfg.stagnation_grad && std::isfinite(cand.loop.T);
    if (cfg.polish_candidate) {
      PolishReport rep;
      cand.loop = newton_polish(hopf, cand.loop, cfg.polish, rep, cfg.flow.metric);
      cand.polish = rep;
    }
    cand.action = action_eval(hopf, cand.loop);
    cand.residuals = critical_residuals(hopf, cand.loop);
    cand.curvature = loop_geodesic_curvature(hopf, cand.loop);
    cand.expected_curvature = 2.0 / std::sqrt(2.0 * family.k - 1.0);
    if (guard_membership(hopf, cand.loop, cfg.flow.delta)) {
      cand.status = "fiberwise";
    } else if (cand.polish && cand.polish->converged) {
      cand.status = "critical";
    } else {
      cand.status = "near-critical";
    }
    rec.candidate = std::move(cand);
  }
  return rec;
}

SweepResult struwe_sweep(const HopfSphereBundle& hopf, const std::vector<double>& k_grid, int m,
                         int n, const MinimaxConfig& cfg, double monotone_tol) {
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    if (!(k_grid[i] > 0.5)) throw PreconditionError("k must exceed 1/2");
    if (i > 0 && !(k_grid[i] > k_grid[i - 1]))
      throw PreconditionError("k_grid must be increasing");
  }
  SweepResult out;
  for (double k : k_grid) {
    const LoopFamily fam = build_family(hopf, m, k, n, flow_T0(cfg.flow, k));
    out.records.push_back(family_minimax_descent(hopf, fam, cfg));
  }
  const std::size_t count = out.records.size();
  for (std::size_t i = 1; i < count; ++i) {
    const double dc = out.records[i].c_estimate - out.records[i - 1].c_estimate;
    if (dc < -monotone_tol) out.monotone = false;
    out.slopes.push_back(dc / (k_grid[i] - k_grid[i - 1]));
  }
  for (std::size_t i = 0; i < count; ++i) {
    double modulus = 0.0;
    if (i > 0) modulus = std::max(modulus, out.slopes[i - 1]);
    if (i + 1 < count) modulus = std::max(modulus, out.slopes[i]);
    out.period_window.push_back(modulus + 3.0);
    if (out.records[i].stagnated) out.flagged.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace maggeo
