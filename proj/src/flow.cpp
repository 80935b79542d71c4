#include "maggeo/flow.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace maggeo {

void validate_flow_config(const FlowConfig& cfg, double k) {
  if (!(k > 0.5)) throw PreconditionError("k must exceed 1/2");
  if (!(cfg.delta > 0.0)) throw PreconditionError("delta must be positive");
  if (!(cfg.step > 0.0)) throw PreconditionError("flow step must be positive");
  if (cfg.max_steps < 0) throw PreconditionError("max_steps must be non-negative");
  if (cfg.epsilon && !(*cfg.epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  if (cfg.T0 && !(*cfg.T0 > 0.0)) throw PreconditionError("T0 must be positive");
  if (!(cfg.parameter_weight > 0.0)) throw PreconditionError("parameter_weight must be positive");
}

double flow_epsilon(const FlowConfig& cfg, double k) {
  if (cfg.epsilon) return *cfg.epsilon;
  return (std::sqrt(2.0 * k) - 1.0) * std::sqrt(cfg.delta);
}

double flow_T0(const FlowConfig& cfg, double k) {
  if (cfg.T0) return *cfg.T0;
  return std::min(flow_epsilon(cfg, k) / (4.0 * k), 0.1);
}

std::string to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::Critical: return "critical";
    case FlowStatus::Truncated: return "truncated";
    case FlowStatus::BudgetExhausted: return "budget-exhausted";
    case FlowStatus::Abnormal: return "abnormal";
  }
  return "unknown";
}

FieldEval truncated_field(const BundleModel& bundle, const ExtendedLoop& x, GradientMetric metric,
                          double parameter_weight) {
  FieldEval out;
  out.action = action_eval(bundle, x);
  const LoopCotangent d = action_differential(bundle, x);
  LoopCotangent g = riesz_gradient(bundle, x, d, metric);
  g.dT *= parameter_weight;
  g.dphi *= parameter_weight;
  const double n2 = std::max(0.0, gradient_norm_sq(d, g));
  out.grad_norm = std::sqrt(n2);
  const double scale = -1.0 / std::sqrt(1.0 + n2);
  out.field = g;
  out.field.loop *= scale;
  out.field.dT *= scale;
  out.field.dphi *= scale;
  out.field_norm = out.grad_norm / std::sqrt(1.0 + n2);
  return out;
}

ExtendedLoop flow_step(const BundleModel& bundle, const ExtendedLoop& x, const LoopCotangent& dir,
                       double h) {
  ExtendedLoop y = x;
  for (int i = 0; i < x.size(); ++i) {
    y.samples.col(i) = bundle.normalize(Vec(x.samples.col(i) + h * dir.loop.col(i)));
  }
  y.T += h * dir.dT;
  y.phi += h * dir.dphi;
  return y;
}

FlowRun flow_start(const BundleModel& bundle, const ExtendedLoop& x0, const FlowConfig& cfg) {
  validate_flow_config(cfg, x0.k);
  validate_loop(bundle, x0);
  FlowRun run;
  run.x = x0;
  return run;
}

void flow_advance(const BundleModel& bundle, FlowRun& run, const FlowConfig& cfg) {
  if (run.done) return;
  FlowOutcome& out = run.out;
  const ExtendedLoop& x = run.x;
  const int r = static_cast<int>(out.action_trace.size());
  out.steps = r;
  const FieldEval f = truncated_field(bundle, x, cfg.metric, cfg.parameter_weight);
  out.action_trace.push_back(f.action);
  out.grad_trace.push_back(f.grad_norm);
  out.period_trace.push_back(x.T);
  out.energy_trace.push_back(loop_energy(bundle, x));

  const auto finish = [&](FlowStatus s) {
    out.status = s;
    out.terminal = run.x;
    run.done = true;
  };
  if (f.grad_norm < cfg.grad_tol) return finish(FlowStatus::Critical);
  const std::optional<int> a = guard_membership(bundle, x, cfg.delta);
  if (a && f.action < -kTwoPi * *a + flow_epsilon(cfg, x.k) / 2.0) {
    out.truncation_index = a;
    return finish(FlowStatus::Truncated);
  }
  if (r == cfg.max_steps) return finish(FlowStatus::BudgetExhausted);

  double h = cfg.step;
  ExtendedLoop next;
  bool accepted = false;
  for (int tries = 0; tries <= cfg.max_halvings; ++tries, h *= 0.5) {
    next = flow_step(bundle, x, f.field, h);
    if (!(next.T > cfg.T_min)) continue;
    if (!cfg.halve_on_increase || action_eval(bundle, next) <= f.action) {
      accepted = true;
      break;
    }
  }
  if (!accepted) {
    if (x.T + h * f.field.dT <= cfg.T_min || x.T <= 2.0 * cfg.T_min) {
      out.message = "period reached T_min outside the guard sets (delta too small?)";
      return finish(FlowStatus::Abnormal);
    }
    out.message = "step size underflow";
    return finish(FlowStatus::BudgetExhausted);
  }
  run.x = std::move(next);
}

FlowOutcome evolve(const BundleModel& bundle, const ExtendedLoop& x0, const FlowConfig& cfg) {
  FlowRun run = flow_start(bundle, x0, cfg);
  while (!run.done) flow_advance(bundle, run, cfg);
  return std::move(run.out);
}

// ---------------------------------------------------------------- Newton polish

namespace {

struct LocalChart {
  const BundleModel& bundle;
  ExtendedLoop base;
  std::vector<Mat> frames;  // tangent basis per sample
  int d = 0;

  LocalChart(const BundleModel& b, const ExtendedLoop& x) : bundle(b), base(x), d(b.dim()) {
    for (int i = 0; i < x.size(); ++i) frames.push_back(b.tangent_basis(x.samples.col(i)));
  }

  int size() const { return base.size() * d + 2; }

  ExtendedLoop point(const Eigen::VectorXd& c) const {
    ExtendedLoop y = base;
    for (int i = 0; i < base.size(); ++i) {
      const Vec q = base.samples.col(i);
      y.samples.col(i) = bundle.normalize(Vec(q + frames[i] * c.segment(i * d, d)));
    }
    y.T += c(size() - 2);
    y.phi += c(size() - 1);
    return y;
  }

  // Gradient of S o point at c.
  Eigen::VectorXd gradient(const Eigen::VectorXd& c) const {
    const ExtendedLoop y = point(c);
    const LoopCotangent diff = action_differential(bundle, y);
    Eigen::VectorXd g(size());
    for (int i = 0; i < base.size(); ++i) {
      const Vec q = base.samples.col(i);
      const Vec v = frames[i] * c.segment(i * d, d);
      const Mat jr = bundle.retraction_jacobian(q, v);
      g.segment(i * d, d) = frames[i].transpose() * (jr.transpose() * Vec(diff.loop.col(i)));
    }
    g(size() - 2) = diff.dT;
    g(size() - 1) = diff.dphi;
    return g;
  }

  // Banded structure: gradient at sample j depends on samples within 2 * pad.
  Eigen::MatrixXd hessian(double h) const {
    const int n = base.size();
    const int m = size();
    const int pad = stencil_order() == 4 ? 2 : 1;
    const int reach = 2 * pad;
    int colors = n;
    for (int k = 2 * reach + 1; k <= n / 2; ++k) {
      if (n % k == 0) {
        colors = k;
        break;
      }
    }
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m, m);
    for (int color = 0; color < colors; ++color) {
      for (int a = 0; a < d; ++a) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
        for (int i = color; i < n; i += colors) e(i * d + a) = h;
        const Eigen::VectorXd col = (gradient(e) - gradient(-e)) / (2.0 * h);
        for (int i = color; i < n; i += colors) {
          for (int off = -reach; off <= reach; ++off) {
            const int j = ((i + off) % n + n) % n;
            hess.block(j * d, i * d + a, d, 1) = col.segment(j * d, d);
          }
        }
      }
    }
    for (int t = m - 2; t < m; ++t) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
      e(t) = h;
      hess.col(t) = (gradient(e) - gradient(-e)) / (2.0 * h);
      hess.row(t).head(m - 2) = hess.col(t).head(m - 2).transpose();
    }
    return 0.5 * (hess + hess.transpose());
  }
};

double flow_metric_norm(const BundleModel& bundle, const ExtendedLoop& x, GradientMetric metric) {
  const LoopCotangent d = action_differential(bundle, x);
  return std::sqrt(std::max(0.0, gradient_norm_sq(d, riesz_gradient(bundle, x, d, metric))));
}

}  // namespace

ExtendedLoop newton_polish(const BundleModel& bundle, const ExtendedLoop& x0,
                           const PolishConfig& cfg, PolishReport& report, GradientMetric metric) {
  validate_loop(bundle, x0);
  ExtendedLoop x = x0;
  report = PolishReport{};
  for (int it = 0;; ++it) {
    report.iterations = it;
    report.grad_norm = flow_metric_norm(bundle, x, metric);
    if (report.grad_norm < cfg.tol) {
      report.converged = true;
      break;
    }
    if (it == cfg.max_iterations) {
      report.message = "iteration budget exhausted";
      break;
    }
    const LocalChart chart(bundle, x);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(chart.size());
    const Eigen::VectorXd g = chart.gradient(zero);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(chart.hessian(cfg.fd_step));
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double cut = cfg.eig_cutoff * lam.cwiseAbs().maxCoeff();
    const Eigen::VectorXd proj = eig.eigenvectors().transpose() * g;
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(lam.size());
    for (int i = 0; i < lam.size(); ++i) {
      if (std::abs(lam(i)) > cut) coeff(i) = -proj(i) / lam(i);
    }
    const Eigen::VectorXd delta = eig.eigenvectors() * coeff;

    double t = 1.0;
    bool accepted = false;
    ExtendedLoop next;
    for (int tries = 0; tries < 12; ++tries, t *= 0.5) {
      const Eigen::VectorXd c = t * delta;
      if (!(x.T + c(chart.size() - 2) > 0.0)) continue;
      if (chart.gradient(c).norm() < g.norm()) {
        next = chart.point(c);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      report.message = "line search failed";
      break;
    }
    x = std::move(next);
  }
  const LoopCotangent d = action_differential(bundle, x);
  report.dT = d.dT;
  report.dphi = d.dphi;
  return x;
}

DescendResult descend(const BundleModel& bundle, const ExtendedLoop& x0, const FlowConfig& cfg,
                      const std::optional<PolishConfig>& polish) {
  DescendResult out;
  out.flow = evolve(bundle, x0, cfg);
  out.candidate = out.flow.terminal;
  out.status = out.flow.status;
  if (polish && out.flow.status != FlowStatus::Truncated &&
      out.flow.status != FlowStatus::Abnormal) {
    PolishReport rep;
    out.candidate = newton_polish(bundle, out.flow.terminal, *polish, rep, cfg.metric);
    out.polish = rep;
    if (rep.converged) out.status = FlowStatus::Critical;
  }
  out.residuals = critical_residuals(bundle, out.candidate);
  return out;
}

}  // namespace maggeo
