#pragma once

// Independent reference computations used by the unit tests. Nothing here
// calls into the library routine it is checking.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "hyperbo/gp.hpp"

namespace oracle {

inline double matern(double r, hyperbo::Smoothness nu) {
  switch (nu) {
    case hyperbo::Smoothness::half: return std::exp(-r);
    case hyperbo::Smoothness::three_halves: return (1.0 + std::sqrt(3.0) * r) * std::exp(-std::sqrt(3.0) * r);
    case hyperbo::Smoothness::five_halves:
      return (1.0 + std::sqrt(5.0) * r + 5.0 * r * r / 3.0) * std::exp(-std::sqrt(5.0) * r);
  }
  return 0.0;
}

inline double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const hyperbo::GpParams& p,
                     hyperbo::Smoothness nu) {
  double r2 = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double d = (a[k] - b[k]) / p.lengthscales[k];
    r2 += d * d;
  }
  return p.signal_variance * matern(std::sqrt(r2), nu);
}

inline Eigen::MatrixXd gram(const Eigen::MatrixXd& xs, const hyperbo::GpParams& p, hyperbo::Smoothness nu,
                            bool noise, double jitter = 0.0) {
  const Eigen::Index n = xs.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = kernel(xs.row(i).transpose(), xs.row(j).transpose(), p, nu);
  if (noise) k.diagonal().array() += p.noise_variance;
  k.diagonal().array() += jitter * p.signal_variance;
  return k;
}

// Gaussian NLL with an explicit determinant and inverse.
inline double dense_nll(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double mean) {
  const Eigen::VectorXd r = y.array() - mean;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  const double quad = r.dot(lu.inverse() * r);
  return 0.5 * quad + 0.5 * std::log(lu.determinant()) +
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

// Posterior mean and variance from explicit inverses.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> dense_posterior(const Eigen::MatrixXd& xs,
                                                                   const Eigen::VectorXd& ys,
                                                                   const Eigen::MatrixXd& q,
                                                                   const hyperbo::GpParams& p,
                                                                   hyperbo::Smoothness nu,
                                                                   double jitter = 0.0) {
  const Eigen::MatrixXd kinv = gram(xs, p, nu, true, jitter).inverse();
  Eigen::MatrixXd kq(q.rows(), xs.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = 0; j < xs.rows(); ++j)
      kq(i, j) = kernel(q.row(i).transpose(), xs.row(j).transpose(), p, nu);
  const Eigen::VectorXd mean = (kq * kinv * (ys.array() - p.constant_mean).matrix()).array() + p.constant_mean;
  Eigen::VectorXd var(q.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) var[i] = p.signal_variance - kq.row(i).dot(kinv * kq.row(i).transpose());
  return {mean, var};
}

// Central differences with a relative step.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double rel_step = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    Eigen::VectorXd a = x;
    Eigen::VectorXd b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double gamma_loglik(const std::vector<double>& x, double alpha, double beta) {
  double s = 0.0;
  for (double v : x) s += alpha * std::log(beta) - std::lgamma(alpha) + (alpha - 1.0) * std::log(v) - beta * v;
  return s;
}

// Best Gamma log-likelihood over a shape grid, with the rate profiled out
// in closed form (beta = alpha / mean).
inline std::pair<double, double> gamma_grid_search(const std::vector<double>& x, double lo, double hi, double step) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double best = -std::numeric_limits<double>::infinity();
  double best_alpha = lo;
  for (double a = lo; a <= hi + 1e-12; a += step) {
    const double ll = gamma_loglik(x, a, a / mean);
    if (ll > best) {
      best = ll;
      best_alpha = a;
    }
  }
  return {best_alpha, best};
}

inline Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = 0.0,
                                      double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

inline hyperbo::GpParams random_params(Eigen::Index d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  hyperbo::GpParams p;
  p.constant_mean = 2.0 * u(rng) - 1.0;
  p.lengthscales.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) p.lengthscales[k] = 0.2 + u(rng);
  p.signal_variance = 0.5 + u(rng);
  p.noise_variance = 0.01 + 0.1 * u(rng);
  return p;
}

}  // namespace oracle
