#include "hyperbo/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "hyperbo/error.hpp"

namespace hyperbo {

std::string_view to_string(OptimizeStatus s) noexcept {
  switch (s) {
    case OptimizeStatus::gradient_converged: return "gradient_converged";
    case OptimizeStatus::value_converged: return "value_converged";
    case OptimizeStatus::max_iterations: return "max_iterations";
    case OptimizeStatus::line_search_failed: return "line_search_failed";
    case OptimizeStatus::diverged: return "diverged";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Probe {
  double step = 0.0;
  double value = kInf;
  double slope = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
  [[nodiscard]] bool finite() const { return std::isfinite(value) && std::isfinite(slope); }
};

class LineSearch {
 public:
  LineSearch(const GradientObjective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& dir, double f0,
             double slope0, const LbfgsOptions& o, int& evals)
      : f_(f), x_(x), dir_(dir), f0_(f0), slope0_(slope0), o_(o), evals_(evals) {}

  // Strong-Wolfe bracketing then zoom. Returns a probe with finite value
  // satisfying sufficient decrease, or an infinite-valued probe on failure.
  Probe run(double step) {
    Probe prev{0.0, f0_, slope0_, x_, {}};
    for (int i = 0; i < o_.max_line_search; ++i) {
      Probe cur = eval(step);
      if (!cur.finite() || cur.value > f0_ + o_.c1 * step * slope0_ || (i > 0 && cur.value >= prev.value))
        return zoom(prev, cur);
      if (std::abs(cur.slope) <= -o_.c2 * slope0_) return cur;
      if (cur.slope >= 0.0) return zoom(cur, prev);
      prev = std::move(cur);
      step *= 2.0;
    }
    return prev.step > 0.0 ? prev : Probe{};
  }

 private:
  Probe eval(double step) {
    Probe p;
    p.step = step;
    p.x = x_ + step * dir_;
    p.grad = Eigen::VectorXd::Zero(x_.size());
    ++evals_;
    try {
      p.value = f_(p.x, p.grad);
    } catch (const NumericalError&) {
      p.value = kInf;
    }
    if (!std::isfinite(p.value) || !p.grad.allFinite()) {
      p.value = kInf;
      p.slope = 0.0;
    } else {
      p.slope = p.grad.dot(dir_);
    }
    return p;
  }

  Probe zoom(Probe lo, Probe hi) {
    for (int i = 0; i < o_.max_line_search; ++i) {
      const double a = std::min(lo.step, hi.step);
      const double b = std::max(lo.step, hi.step);
      double trial = 0.5 * (lo.step + hi.step);
      if (hi.finite()) {
        // Cubic interpolation through both endpoints.
        const double d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (lo.step - hi.step);
        const double disc = d1 * d1 - lo.slope * hi.slope;
        if (disc >= 0.0) {
          const double d2 = std::copysign(std::sqrt(disc), hi.step - lo.step);
          const double c = hi.step - (hi.step - lo.step) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
          if (std::isfinite(c) && c > a + 0.1 * (b - a) && c < b - 0.1 * (b - a)) trial = c;
        }
      }
      Probe t = eval(trial);
      if (!t.finite() || t.value > f0_ + o_.c1 * trial * slope0_ || t.value >= lo.value) {
        hi = std::move(t);
      } else {
        if (std::abs(t.slope) <= -o_.c2 * slope0_) return t;
        if (t.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = std::move(t);
      }
      if (std::abs(hi.step - lo.step) < 1e-16 * std::max(1.0, lo.step)) break;
    }
    // Fall back to the best point with sufficient decrease, if any.
    if (lo.step > 0.0 && lo.finite() && lo.value <= f0_ + o_.c1 * lo.step * slope0_) return lo;
    return Probe{};
  }

  const GradientObjective& f_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& dir_;
  double f0_;
  double slope0_;
  const LbfgsOptions& o_;
  int& evals_;
};

}  // namespace

OptimizeResult lbfgs_minimize(const GradientObjective& objective, Eigen::VectorXd x0, const LbfgsOptions& o) {
  OptimizeResult res;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(x0.size());
  double value = kInf;
  try {
    value = objective(x0, grad);
  } catch (const NumericalError&) {
    value = kInf;
  }
  res.evaluations = 1;
  res.x = std::move(x0);
  res.value = value;
  if (!std::isfinite(value) || !grad.allFinite()) {
    res.status = OptimizeStatus::diverged;
    return res;
  }
  res.trace.push_back(value);

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;

  for (int it = 0; it < o.max_iters; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() < o.grad_tol) {
      res.status = OptimizeStatus::gradient_converged;
      return res;
    }
    // Two-loop recursion.
    Eigen::VectorXd q = grad;
    std::vector<double> alphas(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alphas[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alphas[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alphas[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd dir = -q;
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -grad;
      slope = grad.dot(dir);
    }
    const double step0 = s_hist.empty() ? std::min(1.0, 1.0 / grad.lpNorm<Eigen::Infinity>()) : 1.0;

    LineSearch ls(objective, res.x, dir, res.value, slope, o, res.evaluations);
    Probe accepted = ls.run(step0);
    if (!std::isfinite(accepted.value)) {
      res.status = OptimizeStatus::line_search_failed;
      return res;
    }
    Eigen::VectorXd s = accepted.x - res.x;
    Eigen::VectorXd y = accepted.grad - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > o.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double prev_value = res.value;
    res.x = std::move(accepted.x);
    res.value = accepted.value;
    grad = std::move(accepted.grad);
    res.iterations = it + 1;
    res.trace.push_back(res.value);
    const double scale = std::max({std::abs(prev_value), std::abs(res.value), 1.0});
    if ((prev_value - res.value) <= o.rel_value_tol * scale) {
      res.status = OptimizeStatus::value_converged;
      return res;
    }
  }
  res.status = grad.lpNorm<Eigen::Infinity>() < o.grad_tol ? OptimizeStatus::gradient_converged
                                                            : OptimizeStatus::max_iterations;
  return res;
}

OptimizeResult adam_minimize(const StochasticObjective& objective, Eigen::VectorXd x0, const AdamOptions& o) {
  OptimizeResult res;
  const Eigen::Index n = x0.size();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad(n);
  res.x = std::move(x0);
  double b1t = 1.0;
  double b2t = 1.0;
  for (int it = 0; it < o.max_iters; ++it) {
    grad.setZero();
    double value = kInf;
    try {
      value = objective(res.x, grad, it);
    } catch (const NumericalError&) {
      value = kInf;
    }
    ++res.evaluations;
    if (!std::isfinite(value) || !grad.allFinite()) {
      res.status = OptimizeStatus::diverged;
      res.value = kInf;
      return res;
    }
    res.trace.push_back(value);
    res.value = value;
    b1t *= o.beta1;
    b2t *= o.beta2;
    m = o.beta1 * m + (1.0 - o.beta1) * grad;
    v = o.beta2 * v + (1.0 - o.beta2) * grad.cwiseAbs2();
    const Eigen::VectorXd mhat = m / (1.0 - b1t);
    const Eigen::VectorXd vhat = v / (1.0 - b2t);
    res.x.array() -= o.learning_rate * mhat.array() / (vhat.array().sqrt() + o.epsilon);
    res.iterations = it + 1;
  }
  res.status = OptimizeStatus::max_iterations;
  return res;
}

}  // namespace hyperbo
