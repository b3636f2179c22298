#include "hyperbo/gp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "hyperbo/error.hpp"

namespace hyperbo {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.2360679774997897;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Eigen::MatrixXd scaled_inputs(const Eigen::Ref<const Eigen::MatrixXd>& xs, const GpParams& params) {
  if (xs.cols() != params.dim()) {
    std::ostringstream os;
    os << "input dimension " << xs.cols() << " does not match " << params.dim() << " lengthscales";
    throw ArgumentError(os.str());
  }
  return xs * params.lengthscales.cwiseInverse().asDiagonal();
}

}  // namespace

void GpParams::validate() const {
  if (lengthscales.size() < 1) throw ArgumentError("GpParams needs at least one lengthscale");
  if (!std::isfinite(constant_mean)) throw ArgumentError("constant_mean must be finite");
  for (Eigen::Index k = 0; k < lengthscales.size(); ++k) {
    if (!(lengthscales[k] > 0.0) || !std::isfinite(lengthscales[k]))
      throw ArgumentError("lengthscales must be positive and finite");
  }
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
    throw ArgumentError("signal_variance must be positive and finite");
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
    throw ArgumentError("noise_variance must be positive and finite");
}

void SubDataset::validate() const {
  if (xs.rows() != ys.size()) throw ArgumentError("SubDataset xs rows and ys length differ");
  if (xs.cols() < 1) throw ArgumentError("SubDataset must have dimension >= 1");
  if (!xs.allFinite() || !ys.allFinite()) throw ArgumentError("SubDataset contains non-finite values");
}

double matern_correlation(double r, Smoothness nu) noexcept {
  if (r == 0.0) return 1.0;
  switch (nu) {
    case Smoothness::half:
      return std::exp(-r);
    case Smoothness::three_halves:
      return (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
    case Smoothness::five_halves:
      return (1.0 + kSqrt5 * r + (5.0 / 3.0) * r * r) * std::exp(-kSqrt5 * r);
  }
  return 0.0;
}

double matern_cov(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& x2,
                  const GpParams& params, const KernelSpec& spec) {
  params.validate();
  if (x.size() != params.dim() || x2.size() != params.dim())
    throw ArgumentError("matern_cov: point dimension does not match lengthscales");
  const double r = ((x - x2).array() / params.lengthscales.array()).matrix().norm();
  if (r == 0.0) return params.signal_variance;
  return params.signal_variance * matern_correlation(r, spec.smoothness);
}

Eigen::MatrixXd cross_covariance(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                 const Eigen::Ref<const Eigen::MatrixXd>& b, const GpParams& params,
                                 const KernelSpec& spec) {
  params.validate();
  const Eigen::MatrixXd sa = scaled_inputs(a, params);
  const Eigen::MatrixXd sb = scaled_inputs(b, params);
  // Squared distances via the expansion, clamped against cancellation.
  const Eigen::VectorXd na = sa.rowwise().squaredNorm();
  const Eigen::VectorXd nb = sb.rowwise().squaredNorm();
  Eigen::MatrixXd out = (-2.0 * sa) * sb.transpose();
  out.colwise() += na;
  out.rowwise() += nb.transpose();
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      double r2 = out(i, j);
      // The expansion is inaccurate for nearby points; recompute directly.
      if (r2 < 1e-6 * (na[i] + nb[j])) r2 = (sa.row(i) - sb.row(j)).squaredNorm();
      out(i, j) = params.signal_variance * matern_correlation(std::sqrt(std::max(r2, 0.0)), spec.smoothness);
    }
  }
  return out;
}

Eigen::MatrixXd gram_matrix(const Eigen::Ref<const Eigen::MatrixXd>& xs, const GpParams& params,
                            const KernelSpec& spec, bool add_noise) {
  params.validate();
  if (xs.rows() < 1) throw ArgumentError("gram_matrix needs at least one point");
  (void)scaled_inputs(xs.topRows(1), params);
  // Differences are taken before scaling so that nearby points far from the
  // origin keep their separation exactly.
  const Eigen::MatrixXd xt = xs.transpose();
  const Eigen::VectorXd inv_ell = params.lengthscales.cwiseInverse();
  const Eigen::Index n = xs.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = params.signal_variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double r = (xt.col(i) - xt.col(j)).cwiseProduct(inv_ell).norm();
      const double v = r == 0.0 ? params.signal_variance
                                : params.signal_variance * matern_correlation(r, spec.smoothness);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  if (add_noise) k.diagonal().array() += params.noise_variance;
  return k;
}

CholeskyGram::CholeskyGram(const Eigen::MatrixXd& cov, double scale) {
  std::vector<double> tried;
  for (double j = kJitterStart; j <= kJitterMax * (1.0 + 1e-9); j *= 10.0) {
    tried.push_back(j * scale);
    Eigen::MatrixXd m = cov;
    m.diagonal().array() += j * scale;
    llt_.compute(m);
    if (llt_.info() == Eigen::Success && llt_.matrixLLT().diagonal().allFinite() &&
        (llt_.matrixLLT().diagonal().array() > 0.0).all()) {
      jitter_ = j * scale;
      return;
    }
  }
  std::ostringstream os;
  os << "Cholesky failed for a " << cov.rows() << "x" << cov.cols() << " matrix at jitter levels";
  for (double t : tried) os << ' ' << t;
  throw NumericalError(os.str(), std::move(tried));
}

double CholeskyGram::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

double CholeskyGram::min_pivot() const {
  return llt_.matrixLLT().diagonal().array().square().minCoeff();
}

double sub_dataset_nll(const GpParams& params, const SubDataset& sd, const KernelSpec& spec) {
  if (sd.empty()) throw ArgumentError("sub_dataset_nll needs a nonempty sub-dataset");
  const CholeskyGram chol(gram_matrix(sd.xs, params, spec, true), params.signal_variance);
  const Eigen::VectorXd resid = sd.ys.array() - params.constant_mean;
  const Eigen::VectorXd half_solve = chol.llt().matrixL().solve(resid);
  return 0.5 * half_solve.squaredNorm() + 0.5 * chol.log_det() +
         static_cast<double>(sd.size()) * kHalfLog2Pi;
}

double dataset_nll(const GpParams& params, std::span<const SubDataset> sds, const KernelSpec& spec) {
  double total = 0.0;
  for (const auto& sd : sds) {
    if (sd.dim() != params.dim()) throw ArgumentError("dataset_nll: sub-dataset dimension mismatch");
    total += sub_dataset_nll(params, sd, spec);
  }
  return total;
}

NllGradient sub_dataset_nll_and_gradient(const GpParams& params, const SubDataset& sd,
                                         const KernelSpec& spec) {
  if (sd.empty()) throw ArgumentError("sub_dataset_nll_and_gradient needs a nonempty sub-dataset");
  params.validate();
  const Eigen::Index n = sd.size();
  const Eigen::Index d = params.dim();
  // Centered scaled inputs; distances are unchanged and the quadratic-form
  // lengthscale sums below stay well conditioned.
  Eigen::MatrixXd s = scaled_inputs(sd.xs, params);
  s.rowwise() -= s.colwise().mean();
  const Eigen::MatrixXd st = s.transpose();

  // kf = signal * g(r); c starts as signal * h(r) with h(r) = g'(r) / r.
  Eigen::MatrixXd kf(n, n);
  Eigen::MatrixXd c(n, n);
  const double sig = params.signal_variance;
  for (Eigen::Index j = 0; j < n; ++j) {
    kf(j, j) = sig;
    c(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double r = (st.col(i) - st.col(j)).norm();
      double g = 1.0;
      double h = 0.0;
      if (r > 0.0) {
        switch (spec.smoothness) {
          case Smoothness::half: {
            const double e = std::exp(-r);
            g = e;
            h = -e / r;
            break;
          }
          case Smoothness::three_halves: {
            const double e = std::exp(-kSqrt3 * r);
            g = (1.0 + kSqrt3 * r) * e;
            h = -3.0 * e;
            break;
          }
          case Smoothness::five_halves: {
            const double e = std::exp(-kSqrt5 * r);
            g = (1.0 + kSqrt5 * r + (5.0 / 3.0) * r * r) * e;
            h = -(5.0 / 3.0) * (1.0 + kSqrt5 * r) * e;
            break;
          }
        }
      }
      kf(i, j) = kf(j, i) = sig * g;
      c(i, j) = c(j, i) = sig * h;
    }
  }
  Eigen::MatrixXd k = kf;
  k.diagonal().array() += params.noise_variance;
  const CholeskyGram chol(k, params.signal_variance);

  const Eigen::VectorXd resid = sd.ys.array() - params.constant_mean;
  const Eigen::VectorXd alpha = chol.llt().solve(resid);
  NllGradient out;
  out.value = 0.5 * resid.dot(alpha) + 0.5 * chol.log_det() + static_cast<double>(n) * kHalfLog2Pi;

  // W = K^{-1} - alpha alpha^T; dNLL/dp = 0.5 tr(W dK/dp).
  Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(n, n);
  chol.llt().matrixL().solveInPlace(linv);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  w.selfadjointView<Eigen::Lower>().rankUpdate(linv.transpose());
  w.selfadjointView<Eigen::Lower>().rankUpdate(alpha, -1.0);
  w.triangularView<Eigen::StrictlyUpper>() = w.transpose();

  out.gradient = Eigen::VectorXd::Zero(d + 3);
  out.gradient[0] = -alpha.sum();

  // dK_ij/dl_k = -signal h(r) sdiff_k^2 / l_k. With C = -W o (signal h),
  // 0.5 sum_ij C_ij sdiff_k^2 = sum_i s_ik^2 (C 1)_i - s_k^T C s_k.
  c.array() *= -w.array();
  const Eigen::VectorXd row_sums = c.rowwise().sum();
  const Eigen::MatrixXd cs = c * s;
  for (Eigen::Index kdim = 0; kdim < d; ++kdim) {
    const double quad = s.col(kdim).dot(cs.col(kdim));
    const double diag = s.col(kdim).array().square().matrix().dot(row_sums);
    out.gradient[1 + kdim] = (diag - quad) / params.lengthscales[kdim];
  }

  // The jitter term scales with signal variance, so dK/dsignal = (Kf + jitter I) / signal.
  kf.diagonal().array() += chol.jitter();
  out.gradient[d + 1] = 0.5 * w.cwiseProduct(kf).sum() / params.signal_variance;
  out.gradient[d + 2] = 0.5 * w.trace();
  return out;
}

NllGradient dataset_nll_and_gradient(const GpParams& params, std::span<const SubDataset> sds,
                                     const KernelSpec& spec) {
  NllGradient total;
  total.gradient = Eigen::VectorXd::Zero(params.num_scalars());
  for (const auto& sd : sds) {
    if (sd.dim() != params.dim())
      throw ArgumentError("dataset_nll_and_gradient: sub-dataset dimension mismatch");
    const auto part = sub_dataset_nll_and_gradient(params, sd, spec);
    total.value += part.value;
    total.gradient += part.gradient;
  }
  return total;
}

ConditionedGp::ConditionedGp(GpParams params, SubDataset observed, KernelSpec spec)
    : params_(std::move(params)), observed_(std::move(observed)), spec_(spec) {
  params_.validate();
  if (observed_.empty()) return;
  if (observed_.dim() != params_.dim()) throw ArgumentError("ConditionedGp: dimension mismatch");
  const CholeskyGram chol(gram_matrix(observed_.xs, params_, spec_, true), params_.signal_variance);
  chol_lower_ = chol.llt().matrixL();
  const Eigen::VectorXd resid = observed_.ys.array() - params_.constant_mean;
  const Eigen::VectorXd half = chol.llt().matrixL().solve(resid);
  alpha_ = chol.llt().matrixU().solve(half);
  nll_ = 0.5 * half.squaredNorm() + 0.5 * chol.log_det() +
         static_cast<double>(observed_.size()) * kHalfLog2Pi;
}

GpPosterior ConditionedGp::predict(const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                   bool include_noise) const {
  if (queries.cols() != params_.dim()) throw ArgumentError("posterior: query dimension mismatch");
  const Eigen::Index q = queries.rows();
  GpPosterior post;
  const double noise = include_noise ? params_.noise_variance : 0.0;
  if (observed_.empty()) {
    post.means = Eigen::VectorXd::Constant(q, params_.constant_mean);
    post.variances = Eigen::VectorXd::Constant(q, params_.signal_variance + noise);
    return post;
  }
  const Eigen::MatrixXd kxq = cross_covariance(observed_.xs, queries, params_, spec_);
  post.means = (kxq.transpose() * alpha_).array() + params_.constant_mean;
  const Eigen::MatrixXd v = chol_lower_.triangularView<Eigen::Lower>().solve(kxq);
  post.variances = (params_.signal_variance + noise - v.colwise().squaredNorm().array()).max(0.0).matrix();
  return post;
}

GpPosterior posterior(const GpParams& params, const SubDataset& observed,
                      const Eigen::Ref<const Eigen::MatrixXd>& queries, const KernelSpec& spec,
                      bool include_noise) {
  return ConditionedGp(params, observed, spec).predict(queries, include_noise);
}

Eigen::VectorXd sample_function_values(const GpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& xs,
                                       const KernelSpec& spec, Rng& rng, bool with_noise) {
  if (xs.rows() < 1) throw ArgumentError("sample_function_values needs at least one point");
  const CholeskyGram chol(gram_matrix(xs, params, spec, false), params.signal_variance);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index n = xs.rows();
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  Eigen::VectorXd f = chol.llt().matrixL() * z;
  f.array() += params.constant_mean;
  if (with_noise) {
    const double sd = std::sqrt(params.noise_variance);
    for (Eigen::Index i = 0; i < n; ++i) f[i] += sd * normal(rng);
  }
  return f;
}

std::pair<double, double> lemma1_shift_check(const GpParams& params, std::span<const SubDataset> sds,
                                             double offset, const KernelSpec& spec) {
  if (!(offset > 0.0)) throw ArgumentError("lemma1_shift_check: offset must be positive");
  if (sds.empty()) throw ArgumentError("lemma1_shift_check needs at least one sub-dataset");
  Eigen::Index total = 0;
  for (const auto& sd : sds) total += sd.size();
  SubDataset augmented{Eigen::MatrixXd(total, params.dim()), Eigen::VectorXd(total)};
  Eigen::Index row = 0;
  for (std::size_t j = 0; j < sds.size(); ++j) {
    const auto& sd = sds[j];
    if (sd.dim() != params.dim()) throw ArgumentError("lemma1_shift_check: dimension mismatch");
    augmented.xs.middleRows(row, sd.size()) = sd.xs.array() + offset * static_cast<double>(j);
    augmented.ys.segment(row, sd.size()) = sd.ys;
    row += sd.size();
  }
  return {dataset_nll(params, sds, spec), sub_dataset_nll(params, augmented, spec)};
}

}  // namespace hyperbo
