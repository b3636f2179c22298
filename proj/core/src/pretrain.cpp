#include "hyperbo/pretrain.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "hyperbo/error.hpp"
#include "hyperbo/parallel.hpp"
#include "hyperbo/random.hpp"
#include "json_io.hpp"

namespace hyperbo {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string param_name(const char* base, Eigen::Index k, Eigen::Index dim) {
  return dim == 1 ? std::string(base) : std::string(base) + "_" + std::to_string(k);
}

// Rows of every sub-dataset, subsampled without replacement per iteration.
std::vector<SubDataset> minibatch(std::span<const SubDataset> sds, int per, Rng& rng) {
  std::vector<SubDataset> out;
  out.reserve(sds.size());
  for (const auto& sd : sds) {
    if (sd.size() <= per) {
      out.push_back(sd);
      continue;
    }
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(sd.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (int i = 0; i < per; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), idx.size() - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[pick(rng)]);
    }
    SubDataset b{Eigen::MatrixXd(per, sd.dim()), Eigen::VectorXd(per)};
    for (int i = 0; i < per; ++i) {
      b.xs.row(i) = sd.xs.row(idx[static_cast<std::size_t>(i)]);
      b.ys[i] = sd.ys[idx[static_cast<std::size_t>(i)]];
    }
    out.push_back(std::move(b));
  }
  return out;
}

double safe_dataset_nll(const GpParams& p, std::span<const SubDataset> sds, const KernelSpec& spec) {
  try {
    const double v = dataset_nll(p, sds, spec);
    return std::isfinite(v) ? v : kInf;
  } catch (const Error&) {
    return kInf;
  }
}

}  // namespace

void FitConfig::validate() const {
  if (max_iters < 1) throw ConfigError("FitConfig.max_iters must be >= 1");
  if (restarts < 0) throw ConfigError("FitConfig.restarts must be >= 0");
  if (optimizer == OptimizerKind::adam && !(learning_rate > 0.0))
    throw ConfigError("FitConfig.learning_rate must be positive for adam");
  if (subsample_per_iter && *subsample_per_iter < 1) throw ConfigError("FitConfig.subsample_per_iter must be >= 1");
}

FitConfig FitConfig::lbfgs_defaults() { return FitConfig{}; }

FitConfig FitConfig::adam_defaults() {
  FitConfig cfg;
  cfg.optimizer = OptimizerKind::adam;
  cfg.max_iters = 10000;
  cfg.learning_rate = 1e-3;
  cfg.subsample_per_iter = 50;
  return cfg;
}

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double inverse_softplus(double y) noexcept { return y + std::log(-std::expm1(-y)); }

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

UnconstrainedParams UnconstrainedParams::from_params(const GpParams& p) {
  UnconstrainedParams u;
  u.raw_mean = p.constant_mean;
  u.raw_lengthscales = p.lengthscales.unaryExpr([](double v) { return inverse_softplus(v); });
  u.raw_signal_var = inverse_softplus(p.signal_variance);
  u.raw_noise_var = inverse_softplus(p.noise_variance);
  return u;
}

UnconstrainedParams UnconstrainedParams::from_vector(const Eigen::VectorXd& v) {
  if (v.size() < 4) throw ArgumentError("unconstrained vector needs at least 4 entries");
  const Eigen::Index d = v.size() - 3;
  UnconstrainedParams u;
  u.raw_mean = v[0];
  u.raw_lengthscales = v.segment(1, d);
  u.raw_signal_var = v[d + 1];
  u.raw_noise_var = v[d + 2];
  return u;
}

GpParams UnconstrainedParams::to_params() const {
  GpParams p;
  p.constant_mean = raw_mean;
  p.lengthscales = raw_lengthscales.unaryExpr([](double v) { return softplus(v); });
  p.signal_variance = softplus(raw_signal_var);
  p.noise_variance = softplus(raw_noise_var);
  return p;
}

Eigen::VectorXd UnconstrainedParams::to_vector() const {
  const Eigen::Index d = raw_lengthscales.size();
  Eigen::VectorXd v(d + 3);
  v[0] = raw_mean;
  v.segment(1, d) = raw_lengthscales;
  v[d + 1] = raw_signal_var;
  v[d + 2] = raw_noise_var;
  return v;
}

NllGradient unconstrained_nll_and_gradient(const Eigen::VectorXd& raw, std::span<const SubDataset> sds,
                                           const KernelSpec& spec) {
  const GpParams p = UnconstrainedParams::from_vector(raw).to_params();
  NllGradient r = dataset_nll_and_gradient(p, sds, spec);
  for (Eigen::Index i = 1; i < raw.size(); ++i) r.gradient[i] *= sigmoid(raw[i]);
  return r;
}

GpParams default_initial_params(Eigen::Index dim) {
  return GpParams{0.0, Eigen::VectorXd::Constant(dim, 0.5), 1.0, 1e-3};
}

FitResult fit_gp_mle(std::span<const SubDataset> sds, const FitConfig& cfg, const KernelSpec& spec,
                     std::string_view space_id) {
  cfg.validate();
  const std::string sid(space_id);
  if (sds.empty()) throw ArgumentError("fit_gp_mle: empty dataset" + (sid.empty() ? "" : " for " + sid));
  const Eigen::Index dim = sds.front().dim();
  for (const auto& sd : sds) {
    if (sd.dim() != dim) throw ArgumentError("fit_gp_mle: sub-datasets must share the dimension");
    if (sd.empty()) throw ArgumentError("fit_gp_mle: empty sub-dataset");
  }

  std::vector<GpParams> inits{default_initial_params(dim)};
  const PriorSource init_box = non_informative_prior();
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng = make_rng(cfg.seed, {hash_id(sid), 0x1417, static_cast<std::uint64_t>(r)});
    inits.push_back(sample_gp_params(init_box, dim, rng));
  }

  auto objective = [&](const Eigen::VectorXd& raw, Eigen::VectorXd& grad) {
    try {
      NllGradient r = unconstrained_nll_and_gradient(raw, sds, spec);
      grad = std::move(r.gradient);
      return r.value;
    } catch (const ArgumentError&) {
      return kInf;
    }
  };

  FitResult best;
  best.nll = kInf;
  for (std::size_t r = 0; r < inits.size(); ++r) {
    const Eigen::VectorXd x0 = UnconstrainedParams::from_params(inits[r]).to_vector();
    OptimizeResult opt;
    if (cfg.optimizer == OptimizerKind::lbfgs) {
      LbfgsOptions lo;
      lo.max_iters = cfg.max_iters;
      opt = lbfgs_minimize(objective, x0, lo);
    } else {
      Rng batch_rng = make_rng(cfg.seed, {hash_id(sid), 0xadab, static_cast<std::uint64_t>(r)});
      const int per = cfg.subsample_per_iter.value_or(std::numeric_limits<int>::max());
      auto stochastic = [&](const Eigen::VectorXd& raw, Eigen::VectorXd& grad, int) {
        const auto batch = minibatch(sds, per, batch_rng);
        try {
          NllGradient g = unconstrained_nll_and_gradient(raw, batch, spec);
          grad = std::move(g.gradient);
          return g.value;
        } catch (const ArgumentError&) {
          return kInf;
        }
      };
      AdamOptions ao;
      ao.max_iters = cfg.max_iters;
      ao.learning_rate = cfg.learning_rate;
      opt = adam_minimize(stochastic, x0, ao);
    }
    double full = kInf;
    GpParams params;
    if (opt.status != OptimizeStatus::diverged && opt.x.allFinite()) {
      params = UnconstrainedParams::from_vector(opt.x).to_params();
      full = safe_dataset_nll(params, sds, spec);
    }
    best.restart_nlls.push_back(full);
    best.restart_status.push_back(opt.status);
    if (full < best.nll) {
      best.nll = full;
      best.params = params;
    }
  }
  if (!std::isfinite(best.nll))
    throw FitError(sid, "fit_gp_mle: every restart failed" + (sid.empty() ? "" : " for " + sid));
  return best;
}

std::optional<SpaceFit> FitCache::find(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = fits_.find(key);
  if (it == fits_.end()) return std::nullopt;
  return it->second;
}

void FitCache::store(const std::string& key, const SpaceFit& fit) {
  std::lock_guard lock(mutex_);
  fits_.insert_or_assign(key, fit);
}

std::size_t FitCache::size() const {
  std::lock_guard lock(mutex_);
  return fits_.size();
}

std::string FitCache::key_for(const Dataset& d, const FitConfig& cfg, const KernelSpec& spec) {
  std::ostringstream os;
  os << d.space_id << '|' << static_cast<int>(spec.smoothness) << '|';
  for (const auto& [id, sd] : d.sub_datasets) {
    std::uint64_t h = hash_id(id);
    for (Eigen::Index i = 0; i < sd.size(); ++i) {
      h = mix64(h ^ std::bit_cast<std::uint64_t>(sd.ys[i]));
      for (Eigen::Index k = 0; k < sd.dim(); ++k) h = mix64(h ^ std::bit_cast<std::uint64_t>(sd.xs(i, k)));
    }
    os << id << ':' << sd.size() << ':' << std::hex << h << std::dec << ',';
  }
  os << '|' << static_cast<int>(cfg.optimizer) << ':' << cfg.max_iters << ':' << cfg.learning_rate << ':'
     << cfg.subsample_per_iter.value_or(-1) << ':' << cfg.restarts << ':' << cfg.seed;
  return os.str();
}

std::vector<SpaceFit> fit_all_spaces(const SuperDataset& train, const FitConfig& cfg, const KernelSpec& spec,
                                     int threads, FitCache* cache) {
  const auto ids = train.space_ids();
  std::vector<SpaceFit> fits(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    const Dataset& d = train.datasets.at(ids[i]);
    const std::string key = FitCache::key_for(d, cfg, spec);
    if (cache) {
      if (auto hit = cache->find(key)) {
        fits[i] = *hit;
        return;
      }
    }
    const auto members = d.members();
    try {
      const FitResult r = fit_gp_mle(members, cfg, spec, d.space_id);
      fits[i] = SpaceFit{d.space_id, r.params, r.nll};
    } catch (const FitError&) {
      throw;
    } catch (const Error& e) {
      throw FitError(d.space_id, "fit failed for space '" + d.space_id + "': " + e.what());
    }
    if (cache) cache->store(key, fits[i]);
  });
  return fits;
}

PretrainResult assemble_pretrain(std::vector<SpaceFit> fits) {
  std::sort(fits.begin(), fits.end(), [](const SpaceFit& a, const SpaceFit& b) { return a.space_id < b.space_id; });
  std::vector<GpParams> params;
  for (const auto& f : fits) params.push_back(f.params);
  PretrainResult out;
  out.hyper_prior = fit_hyper_prior(params);
  out.discrete_prior.atoms = params;
  out.per_space_fits = std::move(fits);
  return out;
}

PretrainResult pretrain_two_step(const SuperDataset& train, const FitConfig& cfg, const KernelSpec& spec,
                                 int threads, FitCache* cache) {
  if (train.datasets.size() < 2) throw InsufficientDataError("pretrain_two_step needs at least 2 datasets");
  const auto start = std::chrono::steady_clock::now();
  PretrainResult out = assemble_pretrain(fit_all_spaces(train, cfg, spec, threads, cache));
  out.wallclock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string pretrain_result_to_json(const PretrainResult& result, int indent) {
  json fits = json::array();
  for (const auto& f : result.per_space_fits)
    fits.push_back({{"space_id", f.space_id}, {"params", detail::gp_params_to_json(f.params)}, {"nll", f.nll}});
  json atoms = json::array();
  for (const auto& a : result.discrete_prior.atoms) atoms.push_back(detail::gp_params_to_json(a));
  json root{{"per_space_fits", std::move(fits)},
            {"hyper_prior", detail::hyper_prior_to_json_value(result.hyper_prior)},
            {"discrete_prior", {{"atoms", std::move(atoms)}}},
            {"wallclock_seconds", result.wallclock_seconds}};
  return root.dump(indent);
}

PretrainResult pretrain_result_from_json(std::string_view text) {
  try {
    const json root = json::parse(text);
    PretrainResult out;
    for (const auto& f : root.at("per_space_fits"))
      out.per_space_fits.push_back(SpaceFit{f.at("space_id").get<std::string>(),
                                            detail::gp_params_from_json(f.at("params")), f.at("nll").get<double>()});
    out.hyper_prior = detail::hyper_prior_from_json_value(root.at("hyper_prior"));
    for (const auto& a : root.at("discrete_prior").at("atoms"))
      out.discrete_prior.atoms.push_back(detail::gp_params_from_json(a));
    out.wallclock_seconds = root.value("wallclock_seconds", 0.0);
    return out;
  } catch (const json::exception& e) {
    throw LoadError(std::string("invalid pretrain result JSON: ") + e.what());
  }
}

std::string asymptotics_to_csv(const AsymptoticsTable& table) {
  std::ostringstream os;
  os.precision(17);
  os << "grid,seed,parameter,value\n";
  for (const auto& r : table) os << r.grid << ',' << r.seed << ',' << r.parameter << ',' << r.value << '\n';
  return os.str();
}

AsymptoticsTable asymptotics_from_csv(std::string_view text) {
  AsymptoticsTable out;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("grid,seed,parameter,value", 0) != 0)
    throw LoadError("asymptotics CSV must start with the header grid,seed,parameter,value");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string g, s, p, v;
    if (!std::getline(row, g, ',') || !std::getline(row, s, ',') || !std::getline(row, p, ',') ||
        !std::getline(row, v, ','))
      throw LoadError("malformed asymptotics CSV row: " + line);
    out.push_back(AsymptoticsRow{std::stoi(g), std::stoi(s), p, std::stod(v)});
  }
  return out;
}

std::vector<double> asymptotics_column(const AsymptoticsTable& table, int grid, std::string_view parameter) {
  std::vector<double> out;
  for (const auto& r : table)
    if (r.grid == grid && r.parameter == parameter) out.push_back(r.value);
  return out;
}

AsymptoticsTable asymptotics_single_gp(const GpParams& generating, const std::vector<int>& grid, int obs_per,
                                       int n_seeds, const FitConfig& cfg, const KernelSpec& spec, int threads) {
  generating.validate();
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()) || grid.front() < 1)
    throw ArgumentError("asymptotics_single_gp: grid must be ascending positive integers");
  if (obs_per < 1 || n_seeds < 1) throw ArgumentError("asymptotics_single_gp: obs_per and n_seeds must be >= 1");
  const Eigen::Index dim = generating.dim();
  const std::size_t cells = grid.size() * static_cast<std::size_t>(n_seeds);
  std::vector<AsymptoticsTable> parts(cells);
  parallel_for(cells, threads, [&](std::size_t c) {
    const int g = grid[c / static_cast<std::size_t>(n_seeds)];
    const int seed = static_cast<int>(c % static_cast<std::size_t>(n_seeds));
    Rng rng = make_rng(cfg.seed, {0xa5a5, static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(seed)});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<SubDataset> sds;
    AsymptoticsTable& rows = parts[c];
    try {
      for (int j = 0; j < g; ++j) {
        SubDataset sd{Eigen::MatrixXd(obs_per, dim), Eigen::VectorXd()};
        for (Eigen::Index r = 0; r < sd.xs.rows(); ++r)
          for (Eigen::Index k = 0; k < dim; ++k) sd.xs(r, k) = unit(rng);
        sd.ys = sample_function_values(generating, sd.xs, spec, rng, true);
        sds.push_back(std::move(sd));
      }
      FitConfig cell_cfg = cfg;
      cell_cfg.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(seed)});
      const FitResult fit = fit_gp_mle(sds, cell_cfg, spec);
      rows.push_back({g, seed, "constant_mean", fit.params.constant_mean});
      for (Eigen::Index k = 0; k < dim; ++k)
        rows.push_back({g, seed, param_name("lengthscale", k, dim), fit.params.lengthscales[k]});
      rows.push_back({g, seed, "signal_variance", fit.params.signal_variance});
      rows.push_back({g, seed, "noise_variance", fit.params.noise_variance});
      rows.push_back({g, seed, "nll", fit.nll});
    } catch (const Error&) {
      rows.clear();
      rows.push_back({g, seed, "fit_failed", std::numeric_limits<double>::quiet_NaN()});
    }
  });
  AsymptoticsTable out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

double per_sub_dataset_hierarchical_nll(const PriorSource& prior, const Dataset& d, int q_samples,
                                        Eigen::Index nll_subsample, std::uint64_t seed, const KernelSpec& spec) {
  std::vector<SubDataset> sds;
  for (const auto& [id, sd] : d.sub_datasets)
    sds.push_back(subsample_sub_dataset(sd, nll_subsample, derive_seed(seed, {hash_id(d.space_id), hash_id(id)})));
  Rng rng = make_rng(seed, {0x4e11, hash_id(d.space_id)});
  return hierarchical_nll(prior, sds, q_samples, rng, spec) / static_cast<double>(sds.size());
}

AsymptoticsTable asymptotics_two_step(const SuperDataset& train, const std::vector<int>& grid, int n_seeds,
                                      const FitConfig& cfg, const KernelSpec& spec,
                                      const TwoStepSweepOptions& options) {
  const auto ids = train.space_ids();
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()) || grid.front() < 2)
    throw ArgumentError("asymptotics_two_step: grid must be ascending integers >= 2");
  if (static_cast<std::size_t>(grid.back()) > ids.size())
    throw ArgumentError("asymptotics_two_step: grid exceeds the number of training datasets");
  if (n_seeds < 1) throw ArgumentError("asymptotics_two_step: n_seeds must be >= 1");

  FitCache local_cache;
  FitCache* cache = options.cache ? options.cache : &local_cache;
  // Warm every fit once so the cells only assemble priors.
  (void)fit_all_spaces(train, cfg, spec, options.threads, cache);

  const std::size_t cells = grid.size() * static_cast<std::size_t>(n_seeds);
  std::vector<AsymptoticsTable> parts(cells);
  parallel_for(cells, options.threads, [&](std::size_t c) {
    const int g = grid[c / static_cast<std::size_t>(n_seeds)];
    const int seed = static_cast<int>(c % static_cast<std::size_t>(n_seeds));
    Rng rng = make_rng(cfg.seed, {0x2525, static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(seed)});
    auto chosen = ids;
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(static_cast<std::size_t>(g));
    SuperDataset subset;
    subset.provenance = train.provenance;
    subset.generating_prior = train.generating_prior;
    for (const auto& id : chosen) subset.datasets.emplace(id, train.datasets.at(id));
    AsymptoticsTable& rows = parts[c];
    try {
      const PretrainResult pr = pretrain_two_step(subset, cfg, spec, 1, cache);
      const HyperPrior& h = pr.hyper_prior;
      rows.push_back({g, seed, "constant_mean_mu", h.constant_mean_prior.mu});
      rows.push_back({g, seed, "constant_mean_sigma", h.constant_mean_prior.sigma});
      rows.push_back({g, seed, "lengthscale_alpha", h.lengthscale_prior.alpha});
      rows.push_back({g, seed, "lengthscale_beta", h.lengthscale_prior.beta});
      rows.push_back({g, seed, "signal_variance_alpha", h.signal_variance_prior.alpha});
      rows.push_back({g, seed, "signal_variance_beta", h.signal_variance_prior.beta});
      rows.push_back({g, seed, "noise_variance_alpha", h.noise_variance_prior.alpha});
      rows.push_back({g, seed, "noise_variance_beta", h.noise_variance_prior.beta});
      if (options.test) {
        double weighted = 0.0;
        double count = 0.0;
        for (const auto& [sid, d] : options.test->datasets) {
          const double n = static_cast<double>(d.sub_datasets.size());
          weighted += n * per_sub_dataset_hierarchical_nll(PriorSource{h}, d, options.q_samples,
                                                           options.nll_subsample, static_cast<std::uint64_t>(seed),
                                                           spec);
          count += n;
        }
        rows.push_back({g, seed, "test_nll", weighted / count});
      }
    } catch (const Error&) {
      rows.clear();
      rows.push_back({g, seed, "fit_failed", std::numeric_limits<double>::quiet_NaN()});
    }
  });
  AsymptoticsTable out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace hyperbo
