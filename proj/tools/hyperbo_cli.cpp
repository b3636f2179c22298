// hyperbo: command-line front end for data generation, pre-training, BO
// benchmarks, NLL tables, asymptotics sweeps and plotting.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyperbo/error.hpp"
#include "hyperbo/experiment.hpp"
#include "hyperbo/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hyperbo;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out_dir = ".";
  std::optional<int> threads;
  std::string data;
};

void print_error(std::string_view kind, std::string_view message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

ExperimentConfig load_config(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config);
  if (g.seed) {
    if (cfg.synthetic) cfg.synthetic->seed = *g.seed;
    cfg.fit.seed = *g.seed;
    cfg.bench.seeds = {*g.seed};
    cfg.nll.seeds = {*g.seed};
  }
  if (g.threads) {
    cfg.threads = *g.threads;
    cfg.bench.threads = *g.threads;
    cfg.nll.threads = *g.threads;
  }
  if (!g.data.empty()) {
    cfg.synthetic.reset();
    cfg.external_meta.reset();
    cfg.native_path = g.data;
  }
  return cfg;
}

SuperDataset data_for(const ExperimentConfig& cfg) {
  if (!cfg.synthetic && !cfg.native_path && !cfg.external_meta)
    throw UsageError("no data source: pass --config with a data section or --data <file>");
  return materialize_data(cfg);
}

void report_written(const fs::path& p) { std::cout << "wrote " << p.generic_string() << '\n'; }

int cmd_generate(const Globals& g, const std::string& out_name) {
  ExperimentConfig cfg = load_config(g);
  if (!cfg.synthetic) cfg.synthetic = ExperimentConfig::Synthetic{};
  cfg.native_path.reset();
  cfg.external_meta.reset();
  const SuperDataset super = materialize_data(cfg);
  fs::create_directories(g.out_dir);
  const fs::path out = fs::path(g.out_dir) / out_name;
  save_native(super, out);
  std::cout << "generated " << super.datasets.size() << " datasets, " << super.total_sub_datasets()
            << " sub-datasets\n";
  report_written(out);
  return 0;
}

int cmd_pretrain(const Globals& g) {
  const ExperimentConfig cfg = load_config(g);
  const SuperDataset super = data_for(cfg);
  const SplitViews views = split(super, cfg.split);
  const PretrainResult result = pretrain_two_step(views.train, cfg.fit, cfg.kernel, cfg.threads);
  fs::create_directories(g.out_dir);
  const fs::path out = fs::path(g.out_dir) / "pretrain.json";
  write_text_file(out, pretrain_result_to_json(result));
  report_written(out);
  return 0;
}

std::vector<MethodSpec> methods_for(const ExperimentConfig& cfg, const std::vector<std::string>& override_names) {
  std::vector<MethodSpec> methods = cfg.methods;
  if (!override_names.empty()) {
    const AcquisitionSpec acq = methods.empty() ? AcquisitionSpec{ProbabilityOfImprovement{}} : methods.front().acquisition;
    methods.clear();
    for (const auto& n : override_names) methods.push_back({parse_method_kind(n), acq});
  }
  if (methods.empty()) throw UsageError("no methods: set \"methods\" in the config or pass --methods");
  return methods;
}

int cmd_bo(const Globals& g, const std::vector<std::string>& method_names) {
  ExperimentConfig cfg = load_config(g);
  const auto methods = methods_for(cfg, method_names);
  const SuperDataset super = data_for(cfg);
  const SplitViews views = split(super, cfg.split);
  PriorBuilder priors(views.train, cfg.fit, cfg.kernel, cfg.threads);
  cfg.bench.out_dir = g.out_dir;
  const ExperimentReport report = run_benchmark(views, methods, priors, cfg.bench, cfg.kernel);
  const fs::path curves = fs::path(g.out_dir) / "curves.csv";
  write_text_file(fs::path(g.out_dir) / "curves.svg", curves_csv_to_svg(read_text_file(curves)));
  for (const auto& c : report.curves)
    std::cout << c.method << ": final regret " << c.final_mean() << " +- " << c.final_std() << " (" << c.trajectories
              << " runs, " << c.failures << " failed)\n";
  report_written(fs::path(g.out_dir) / "summary.json");
  return 0;
}

int cmd_nll(const Globals& g, const std::vector<std::string>& method_names) {
  const ExperimentConfig cfg = load_config(g);
  auto methods = methods_for(cfg, method_names);
  std::erase_if(methods, [](const MethodSpec& m) { return m.kind == MethodKind::random; });
  if (methods.empty()) throw UsageError("nll: every requested method is random");
  const SuperDataset super = data_for(cfg);
  const SplitViews views = split(super, cfg.split);
  PriorBuilder priors(views.train, cfg.fit, cfg.kernel, cfg.threads);
  const NllTable table = evaluate_nll(views, methods, priors, cfg.nll, cfg.kernel);
  fs::create_directories(g.out_dir);
  write_text_file(fs::path(g.out_dir) / "nll_long.csv", table.rows_csv());
  write_text_file(fs::path(g.out_dir) / "nll_summary.json", table.summary_json());
  for (const auto& s : table.summary)
    std::cout << s.method << ": train " << s.train_mean << " +- " << s.train_std << ", test " << s.test_mean << " +- "
              << s.test_std << '\n';
  report_written(fs::path(g.out_dir) / "nll_summary.json");
  return 0;
}

int cmd_asymptotics(const Globals& g, const std::string& kind) {
  const ExperimentConfig cfg = load_config(g);
  fs::create_directories(g.out_dir);
  const auto& a = cfg.asymptotics;
  if (kind == "single" || kind == "both") {
    GpParams generating;
    if (a.single_generating) {
      generating = *a.single_generating;
    } else {
      generating.constant_mean = 0.0;
      generating.lengthscales = Eigen::VectorXd::Constant(1, 0.2);
      generating.signal_variance = 1.0;
      generating.noise_variance = 0.01;
    }
    const auto table = asymptotics_single_gp(generating, a.single_grid, a.single_obs_per, a.single_seeds, cfg.fit,
                                             cfg.kernel, cfg.threads);
    const fs::path out = fs::path(g.out_dir) / "asymptotics_single.csv";
    write_text_file(out, asymptotics_to_csv(table));
    report_written(out);
  }
  if (kind == "two_step" || kind == "both") {
    const SuperDataset super = data_for(cfg);
    const SplitViews views = split(super, cfg.split);
    TwoStepSweepOptions opts;
    opts.test = &views.test;
    opts.q_samples = cfg.nll.q_samples;
    opts.nll_subsample = cfg.nll.nll_subsample;
    opts.threads = cfg.threads;
    const auto table = asymptotics_two_step(views.train, a.two_step_grid, a.two_step_seeds, cfg.fit, cfg.kernel, opts);
    const fs::path out = fs::path(g.out_dir) / "asymptotics_two_step.csv";
    write_text_file(out, asymptotics_to_csv(table));
    report_written(out);
  }
  return 0;
}

int cmd_plot(const Globals& g, const std::string& input, const std::string& kind) {
  const std::string csv = read_text_file(input);
  std::string resolved = kind;
  if (resolved == "auto") resolved = csv.rfind("grid,seed,parameter,value", 0) == 0 ? "asymptotics" : "curves";
  fs::create_directories(g.out_dir);
  const std::string stem = fs::path(input).stem().string();
  if (resolved == "curves") {
    const fs::path out = fs::path(g.out_dir) / (stem + ".svg");
    write_text_file(out, curves_csv_to_svg(csv));
    report_written(out);
  } else if (resolved == "asymptotics") {
    for (const auto& [param, svg] : asymptotics_csv_to_svgs(csv)) {
      const fs::path out = fs::path(g.out_dir) / (stem + "_" + param + ".svg");
      write_text_file(out, svg);
      report_written(out);
    }
  } else {
    throw UsageError("plot: --kind must be auto, curves or asymptotics");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical GP pre-training and transfer Bayesian optimization"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base seed; overrides data, fit and experiment seeds");
  app.add_option("--config", g.config, "Experiment JSON file")->check(CLI::ExistingFile);
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--data", g.data, "Native super-dataset file; overrides the config data section");

  std::string gen_out = "super_dataset.json";
  auto* gen = app.add_subcommand("generate", "Write a synthetic super-dataset");
  gen->add_option("--output", gen_out, "File name inside --out-dir")->capture_default_str();

  auto* pre = app.add_subcommand("pretrain", "Two-step pre-training; writes pretrain.json");

  std::vector<std::string> methods;
  auto* bo = app.add_subcommand("bo", "Run the offline BO benchmark");
  bo->add_option("--methods", methods, "Methods to run; overrides the config")->delimiter(',');

  std::vector<std::string> nll_methods;
  auto* nll = app.add_subcommand("nll", "Train/test NLL table");
  nll->add_option("--methods", nll_methods, "Methods to score; overrides the config")->delimiter(',');

  std::string asym_kind = "both";
  auto* asym = app.add_subcommand("asymptotics", "Estimator sweeps");
  asym->add_option("--kind", asym_kind, "single, two_step or both")
      ->check(CLI::IsMember({"single", "two_step", "both"}))
      ->capture_default_str();

  std::string plot_input;
  std::string plot_kind = "auto";
  auto* plot = app.add_subcommand("plot", "Render a curves or asymptotics CSV to SVG");
  plot->add_option("--input", plot_input, "CSV file")->required()->check(CLI::ExistingFile);
  plot->add_option("--kind", plot_kind, "auto, curves or asymptotics")->capture_default_str();

  for (auto* sub : {gen, pre, bo, nll, asym, plot}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    (void)app.exit(e);
    print_error("usage", e.what());
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(g, gen_out);
    if (*pre) return cmd_pretrain(g);
    if (*bo) return cmd_bo(g, methods);
    if (*nll) return cmd_nll(g, nll_methods);
    if (*asym) return cmd_asymptotics(g, asym_kind);
    if (*plot) return cmd_plot(g, plot_input, plot_kind);
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    return kExitUsage;
  } catch (const hyperbo::Error& e) {
    print_error(e.kind(), e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
