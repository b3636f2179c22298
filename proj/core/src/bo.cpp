#include "hyperbo/bo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "hyperbo/error.hpp"

namespace hyperbo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

SubDataset rows_of(const SubDataset& pool, std::span<const Eigen::Index> idx) {
  SubDataset out{Eigen::MatrixXd(static_cast<Eigen::Index>(idx.size()), pool.dim()),
                 Eigen::VectorXd(static_cast<Eigen::Index>(idx.size()))};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.xs.row(static_cast<Eigen::Index>(i)) = pool.xs.row(idx[i]);
    out.ys[static_cast<Eigen::Index>(i)] = pool.ys[idx[i]];
  }
  return out;
}

}  // namespace

std::string acquisition_name(const AcquisitionSpec& acq) {
  return std::visit(Overloaded{
                        [](const ProbabilityOfImprovement&) { return std::string("pi"); },
                        [](const ExpectedImprovement&) { return std::string("ei"); },
                        [](const UpperConfidenceBound&) { return std::string("ucb"); },
                    },
                    acq);
}

Eigen::VectorXd acquisition_values(const AcquisitionSpec& acq, const GpPosterior& post, double best_y) {
  const Eigen::Index n = post.means.size();
  if (n == 0 || post.variances.size() != n) throw ArgumentError("acquisition_values: empty or inconsistent posterior");
  if ((post.variances.array() < 0.0).any()) throw ArgumentError("acquisition_values: negative posterior variance");
  Eigen::VectorXd out(n);
  std::visit(Overloaded{
                 [&](const ProbabilityOfImprovement& pi) {
                   const double tau = best_y + pi.zeta;
                   for (Eigen::Index i = 0; i < n; ++i) {
                     const double m = post.means[i];
                     const double s = std::sqrt(post.variances[i]);
                     if (s > 0.0) out[i] = std_normal_cdf((m - tau) / s);
                     else out[i] = m > tau ? 1.0 : (m < tau ? 0.0 : 0.5);
                   }
                 },
                 [&](const ExpectedImprovement&) {
                   const double tau = best_y;
                   for (Eigen::Index i = 0; i < n; ++i) {
                     const double m = post.means[i];
                     const double s = std::sqrt(post.variances[i]);
                     if (s > 0.0) {
                       const double z = (m - tau) / s;
                       out[i] = s * std_normal_pdf(z) + (m - tau) * std_normal_cdf(z);
                     } else {
                       out[i] = std::max(m - tau, 0.0);
                     }
                   }
                 },
                 [&](const UpperConfidenceBound& ucb) {
                   out = post.means.array() + ucb.beta * post.variances.array().sqrt();
                 },
             },
             acq);
  return out;
}

void BoConfig::validate() const {
  if (budget < 1) throw ConfigError("BoConfig.budget must be >= 1");
  if (n_init < 0) throw ConfigError("BoConfig.n_init must be >= 0");
  if (r_samples < 1) throw ConfigError("BoConfig.r_samples must be >= 1");
}

std::string BoTrajectory::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "step,candidate_index,y,incumbent,regret\n";
  for (std::size_t t = 0; t < picks.size(); ++t)
    os << t + 1 << ',' << picks[t].candidate_index << ',' << picks[t].y << ',' << incumbents[t] << ','
       << regrets[t] << '\n';
  return os.str();
}

Eigen::VectorXd softmax_weights(const Eigen::VectorXd& log_weights) {
  if (log_weights.size() == 0) throw ArgumentError("softmax_weights: empty input");
  const double top = log_weights.maxCoeff();
  if (!(top > kNegInf) || std::isnan(top)) throw Error("numerical", "softmax_weights: every log-weight is -inf");
  Eigen::VectorXd w = (log_weights.array() - top).exp();
  w /= w.sum();
  return w;
}

Eigen::VectorXd combine_reweighted(const Eigen::VectorXd& log_weights, const Eigen::MatrixXd& per_sample) {
  if (per_sample.cols() != log_weights.size()) throw ArgumentError("combine_reweighted: shape mismatch");
  const Eigen::VectorXd w = softmax_weights(log_weights);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(per_sample.rows());
  for (Eigen::Index r = 0; r < w.size(); ++r)
    if (w[r] > 0.0) out.noalias() += w[r] * per_sample.col(r);
  return out;
}

Eigen::Index argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) throw ArgumentError("argmax_lowest: empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best] || (std::isnan(v[best]) && !std::isnan(v[i]))) best = i;
  return best;
}

double incumbent_value(const SubDataset& observed, const GpParams& params) {
  return observed.empty() ? params.constant_mean : observed.ys.maxCoeff();
}

Eigen::VectorXd single_gp_acquisition(const AcquisitionSpec& acq, const GpParams& params, const SubDataset& observed,
                                      const Eigen::Ref<const Eigen::MatrixXd>& candidates, const BoConfig& cfg,
                                      const KernelSpec& spec) {
  const ConditionedGp gp(params, observed, spec);
  return acquisition_values(acq, gp.predict(candidates, cfg.include_noise_in_acq_variance),
                            incumbent_value(observed, params));
}

ReweightedAcquisition reweighted_acquisition(const AcquisitionSpec& acq, std::span<const GpParams> samples,
                                             const SubDataset& observed,
                                             const Eigen::Ref<const Eigen::MatrixXd>& candidates, const BoConfig& cfg,
                                             const KernelSpec& spec) {
  if (candidates.rows() == 0) throw ArgumentError("hierarchical_acquisition: no candidates");
  if (samples.empty()) throw ArgumentError("hierarchical_acquisition: no parameter samples");
  const auto r_count = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd per_sample = Eigen::MatrixXd::Zero(candidates.rows(), r_count);
  Eigen::VectorXd log_w = Eigen::VectorXd::Constant(r_count, kNegInf);
  for (Eigen::Index r = 0; r < r_count; ++r) {
    try {
      const ConditionedGp gp(samples[static_cast<std::size_t>(r)], observed, spec);
      const Eigen::VectorXd a = acquisition_values(acq, gp.predict(candidates, cfg.include_noise_in_acq_variance),
                                                   incumbent_value(observed, gp.params()));
      if (!a.allFinite() || !std::isfinite(gp.nll())) continue;
      per_sample.col(r) = a;
      log_w[r] = -gp.nll();
    } catch (const NumericalError&) {
    } catch (const ArgumentError&) {
    }
  }
  ReweightedAcquisition out;
  if (observed.empty()) {
    // Prior-only start: exactly uniform over the usable samples.
    const auto usable = (log_w.array() > kNegInf).count();
    if (usable == 0) throw Error("numerical", "hierarchical_acquisition: no usable prior sample");
    out.weights = (log_w.array() > kNegInf).select(Eigen::VectorXd::Constant(r_count, 1.0 / static_cast<double>(usable)),
                                                    Eigen::VectorXd::Zero(r_count));
  } else {
    out.weights = softmax_weights(log_w);
  }
  out.values = Eigen::VectorXd::Zero(candidates.rows());
  for (Eigen::Index r = 0; r < r_count; ++r)
    if (out.weights[r] > 0.0) out.values.noalias() += out.weights[r] * per_sample.col(r);
  out.samples.assign(samples.begin(), samples.end());
  return out;
}

ReweightedAcquisition hierarchical_acquisition(const AcquisitionSpec& acq, const PriorSource& prior,
                                               const SubDataset& observed,
                                               const Eigen::Ref<const Eigen::MatrixXd>& candidates, const BoConfig& cfg,
                                               Rng& rng, const KernelSpec& spec) {
  if (cfg.r_samples < 1) throw ConfigError("hierarchical_acquisition: r_samples must be >= 1");
  std::vector<GpParams> samples;
  samples.reserve(static_cast<std::size_t>(cfg.r_samples));
  for (int r = 0; r < cfg.r_samples; ++r) samples.push_back(sample_gp_params(prior, candidates.cols(), rng));
  try {
    return reweighted_acquisition(acq, samples, observed, candidates, cfg, spec);
  } catch (const Error& e) {
    if (e.kind() == "numerical")
      throw Error("numerical", std::string(e.what()) + " (prior " + describe(prior) + ")");
    throw;
  }
}

std::vector<Eigen::Index> draw_init_indices(Eigen::Index pool_size, int n_init, std::uint64_t seed) {
  if (n_init < 0 || n_init > pool_size) throw ArgumentError("draw_init_indices: n_init exceeds the pool");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(pool_size));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng = make_rng(seed, {0x1417});
  for (int i = 0; i < n_init; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), idx.size() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(n_init));
  return idx;
}

BoTrajectory run_bo(const AcquisitionSpec& acq, const BoModel& model, const SubDataset& pool, const BoConfig& cfg,
                    Rng& rng, const KernelSpec& spec, std::span<const Eigen::Index> init_indices) {
  cfg.validate();
  pool.validate();
  const Eigen::Index n = pool.size();
  if (n < cfg.n_init + cfg.budget)
    throw ArgumentError("run_bo: pool of " + std::to_string(n) + " is smaller than n_init + budget = " +
                        std::to_string(cfg.n_init + cfg.budget));

  std::vector<Eigen::Index> picked;
  if (init_indices.empty()) {
    picked = draw_init_indices(n, cfg.n_init, cfg.seed);
  } else {
    if (static_cast<int>(init_indices.size()) != cfg.n_init) throw ArgumentError("run_bo: init index count != n_init");
    picked.assign(init_indices.begin(), init_indices.end());
  }
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (auto i : picked) {
    if (i < 0 || i >= n || used[static_cast<std::size_t>(i)]) throw ArgumentError("run_bo: invalid init indices");
    used[static_cast<std::size_t>(i)] = true;
  }

  std::vector<GpParams> frozen;
  if (const auto* prior = std::get_if<PriorSource>(&model); prior && !cfg.redraw_samples_each_step)
    for (int r = 0; r < cfg.r_samples; ++r) frozen.push_back(sample_gp_params(*prior, pool.dim(), rng));

  for (int t = 0; t < cfg.budget; ++t) {
    std::vector<Eigen::Index> free;
    free.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      if (!used[static_cast<std::size_t>(i)]) free.push_back(i);
    Eigen::Index choice = 0;
    if (std::holds_alternative<RandomPolicy>(model)) {
      choice = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    } else {
      const SubDataset observed = rows_of(pool, picked);
      Eigen::MatrixXd cand(static_cast<Eigen::Index>(free.size()), pool.dim());
      for (std::size_t i = 0; i < free.size(); ++i) cand.row(static_cast<Eigen::Index>(i)) = pool.xs.row(free[i]);
      Eigen::VectorXd values;
      if (const auto* fixed = std::get_if<GpParams>(&model)) {
        values = single_gp_acquisition(acq, *fixed, observed, cand, cfg, spec);
      } else if (!frozen.empty()) {
        values = reweighted_acquisition(acq, frozen, observed, cand, cfg, spec).values;
      } else {
        values = hierarchical_acquisition(acq, std::get<PriorSource>(model), observed, cand, cfg, rng, spec).values;
      }
      choice = free[static_cast<std::size_t>(argmax_lowest(values))];
    }
    used[static_cast<std::size_t>(choice)] = true;
    picked.push_back(choice);
  }

  BoTrajectory traj;
  const std::span<const double> pool_ys(pool.ys.data(), static_cast<std::size_t>(n));
  std::vector<double> seen;
  double incumbent = kNegInf;
  for (auto i : picked) {
    const double y = pool.ys[i];
    seen.push_back(y);
    incumbent = std::max(incumbent, y);
    traj.picks.push_back(BoPick{i, pool.xs.row(i).transpose(), y});
    traj.incumbents.push_back(incumbent);
    traj.regrets.push_back(normalized_simple_regret(seen, pool_ys));
  }
  return traj;
}

double normalized_simple_regret(std::span<const double> ys_seen, std::span<const double> pool_ys) {
  if (pool_ys.empty()) throw ArgumentError("normalized_simple_regret: empty pool");
  if (ys_seen.empty()) throw ArgumentError("normalized_simple_regret: nothing observed");
  const auto [lo, hi] = std::minmax_element(pool_ys.begin(), pool_ys.end());
  if (!(*hi > *lo)) throw DegenerateDataError("normalized_simple_regret: pool outputs are constant");
  const double best = *std::max_element(ys_seen.begin(), ys_seen.end());
  return (*hi - best) / (*hi - *lo);
}

}  // namespace hyperbo
