#pragma once

#include <span>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hyperbo/random.hpp"

namespace hyperbo {

// Matérn smoothness ν.
enum class Smoothness { half, three_halves, five_halves };

struct KernelSpec {
  Smoothness smoothness = Smoothness::three_halves;
};

// Constant-mean, ARD Matérn GP with Gaussian observation noise.
struct GpParams {
  double constant_mean = 0.0;
  Eigen::VectorXd lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-3;

  [[nodiscard]] Eigen::Index dim() const noexcept { return lengthscales.size(); }
  // Throws ArgumentError on non-positive or non-finite entries.
  void validate() const;
  // Number of scalar parameters: mean, d lengthscales, signal, noise.
  [[nodiscard]] Eigen::Index num_scalars() const noexcept { return dim() + 3; }
};

// Observations of one function: rows of xs are inputs, ys the noisy outputs.
struct SubDataset {
  Eigen::MatrixXd xs;
  Eigen::VectorXd ys;

  [[nodiscard]] Eigen::Index size() const noexcept { return ys.size(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return xs.cols(); }
  [[nodiscard]] bool empty() const noexcept { return ys.size() == 0; }

  [[nodiscard]] static SubDataset with_dim(Eigen::Index d) {
    return SubDataset{Eigen::MatrixXd(0, d), Eigen::VectorXd(0)};
  }
  // Throws ArgumentError when shapes disagree or values are non-finite.
  void validate() const;
};

struct GpPosterior {
  Eigen::VectorXd means;
  Eigen::VectorXd variances;
};

// Diagonal jitter ladder, in units of signal variance.
inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-4;

// Matérn correlation g(r) for a lengthscale-scaled distance r.
[[nodiscard]] double matern_correlation(double r, Smoothness nu) noexcept;

[[nodiscard]] double matern_cov(const Eigen::Ref<const Eigen::VectorXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& x2, const GpParams& params,
                                const KernelSpec& spec);

[[nodiscard]] Eigen::MatrixXd gram_matrix(const Eigen::Ref<const Eigen::MatrixXd>& xs,
                                          const GpParams& params, const KernelSpec& spec,
                                          bool add_noise);

// k(a_i, b_j) for every row pair; noise-free.
[[nodiscard]] Eigen::MatrixXd cross_covariance(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                               const Eigen::Ref<const Eigen::MatrixXd>& b,
                                               const GpParams& params, const KernelSpec& spec);

// Cholesky factor of a covariance matrix with the jitter ladder applied:
// factors cov + jitter * scale * I, escalating jitter by 10x from
// kJitterStart up to kJitterMax.
class CholeskyGram {
 public:
  CholeskyGram(const Eigen::MatrixXd& cov, double scale);

  [[nodiscard]] const Eigen::LLT<Eigen::MatrixXd>& llt() const noexcept { return llt_; }
  [[nodiscard]] double jitter() const noexcept { return jitter_; }
  [[nodiscard]] double log_det() const;
  [[nodiscard]] double min_pivot() const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
};

[[nodiscard]] double sub_dataset_nll(const GpParams& params, const SubDataset& sd,
                                     const KernelSpec& spec);

[[nodiscard]] double dataset_nll(const GpParams& params, std::span<const SubDataset> sds,
                                 const KernelSpec& spec);

// NLL and its gradient with respect to the natural parameters in the order
// [constant_mean, lengthscales..., signal_variance, noise_variance].
struct NllGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

[[nodiscard]] NllGradient sub_dataset_nll_and_gradient(const GpParams& params, const SubDataset& sd,
                                                       const KernelSpec& spec);

[[nodiscard]] NllGradient dataset_nll_and_gradient(const GpParams& params,
                                                   std::span<const SubDataset> sds,
                                                   const KernelSpec& spec);

// A GP conditioned on observations. The Cholesky factor is shared between
// the marginal likelihood of the observations and predictions.
class ConditionedGp {
 public:
  ConditionedGp(GpParams params, SubDataset observed, KernelSpec spec);

  // NLL of the conditioning observations; 0 when there are none.
  [[nodiscard]] double nll() const noexcept { return nll_; }
  [[nodiscard]] GpPosterior predict(const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                    bool include_noise) const;
  [[nodiscard]] const GpParams& params() const noexcept { return params_; }

 private:
  GpParams params_;
  SubDataset observed_;
  KernelSpec spec_;
  Eigen::MatrixXd chol_lower_;
  Eigen::VectorXd alpha_;
  double nll_ = 0.0;
};

[[nodiscard]] GpPosterior posterior(const GpParams& params, const SubDataset& observed,
                                    const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                    const KernelSpec& spec, bool include_noise);

// One joint draw of (noisy) function values at xs.
[[nodiscard]] Eigen::VectorXd sample_function_values(const GpParams& params,
                                                     const Eigen::Ref<const Eigen::MatrixXd>& xs,
                                                     const KernelSpec& spec, Rng& rng,
                                                     bool with_noise);

// Returns (sum of per-sub-dataset NLLs, NLL of the single sub-dataset
// obtained by translating sub-dataset j by offset * j along every axis).
[[nodiscard]] std::pair<double, double> lemma1_shift_check(const GpParams& params,
                                                           std::span<const SubDataset> sds,
                                                           double offset, const KernelSpec& spec);

}  // namespace hyperbo
