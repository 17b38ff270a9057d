#include "segreg/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "segreg/piecewise.hpp"
#include "segreg/report_io.hpp"
#include "segreg/rhlp.hpp"
#include "segreg/simulation.hpp"

namespace segreg::cli {

namespace {

struct RunConfig {
  std::string input;
  std::string output;
  std::string report;
  std::string denoised_csv;
  int K = 3;
  int p = 2;
  int q = 1;
  std::vector<int> K_list;
  std::vector<int> p_list;
  double epsilon = 1e-6;
  double delta = 1e-6;
  int max_iter = 1000;
  int restarts = 10;
  std::optional<std::uint64_t> seed;
  double variance_floor = kDefaultVarianceFloor;
  std::optional<int> min_segment_length;
  bool normalize_time = false;
  std::string init = "uniform";
  std::string scenario;
  std::string params;
  std::size_t n = 1000;
  std::vector<std::string> scenarios{"situation1", "situation2"};
  std::vector<std::size_t> n_grid;
  int replicates = 20;
  std::vector<std::string> methods{"rhlp", "fisher_dp", "fisher_iter"};
  bool full_grid = false;
  bool no_timing = false;
};

std::uint64_t require_seed(const RunConfig& cfg, const std::string& command) {
  if (!cfg.seed) throw Error(ErrorKind::InvalidArgument, command + " requires --seed");
  return *cfg.seed;
}

void check_ranges(const RunConfig& cfg) {
  if (cfg.K < 1) throw Error(ErrorKind::InvalidArgument, "--k must be >= 1");
  if (cfg.p < 0 || cfg.q < 0) throw Error(ErrorKind::InvalidArgument, "--p and --q must be >= 0");
  if (!(cfg.epsilon > 0.0) || !(cfg.delta > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "--epsilon and --delta must be positive");
  }
  if (cfg.max_iter < 1) throw Error(ErrorKind::InvalidArgument, "--max-iter must be >= 1");
  if (cfg.restarts < 0) throw Error(ErrorKind::InvalidArgument, "--restarts must be >= 0");
  if (!(cfg.variance_floor > 0.0)) throw Error(ErrorKind::InvalidArgument, "--variance-floor must be positive");
}

EmOptions em_options(const RunConfig& cfg) {
  EmOptions em;
  em.epsilon = cfg.epsilon;
  em.max_iter = cfg.max_iter;
  em.irls.delta = cfg.delta;
  em.variance_floor = cfg.variance_floor;
  em.restarts = cfg.restarts;
  em.seed = cfg.seed.value_or(0);
  if (cfg.init == "uniform") {
    em.init = InitStrategy::Uniform;
  } else if (cfg.init == "randomized") {
    em.init = InitStrategy::Randomized;
  } else {
    throw Error(ErrorKind::InvalidArgument, "--init must be uniform or randomized");
  }
  return em;
}

SegmentationOptions segmentation_options(const RunConfig& cfg) {
  SegmentationOptions options;
  options.min_segment_length = cfg.min_segment_length;
  options.variance_floor = cfg.variance_floor;
  return options;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  return out;
}

Signal read_input(const RunConfig& cfg) {
  Signal signal = load_signal_csv(cfg.input);
  if (!cfg.normalize_time) return signal;
  if (signal.size() < 2) throw Error(ErrorKind::InvalidArgument, "time normalization needs n >= 2");
  const Eigen::VectorXd& t = signal.t();
  const double t0 = t[0];
  const double span = t[t.size() - 1] - t0;
  return Signal(((t.array() - t0) * (5.0 / span)).matrix(), signal.x());
}

void write_fit_csv(const std::string& path, const Signal& signal, const std::vector<int>& labels,
                   const std::vector<double>& denoised) {
  std::ofstream out = open_output(path);
  out << "t,x,denoised,label\n";
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out << format_double(signal.t()[idx]) << ',' << format_double(signal.x()[idx]) << ','
        << format_double(denoised[i]) << ',' << labels[i] << '\n';
  }
}

void finish_fit(const RunConfig& cfg, const Signal& signal, StoredReport report,
                std::ostream& out) {
  if (cfg.no_timing) report.runtime_seconds.reset();
  save_fit_report(report, cfg.output);
  if (!cfg.denoised_csv.empty()) write_fit_csv(cfg.denoised_csv, signal, report.labels, report.denoised);
  out << "wrote " << cfg.output << '\n';
}

void cmd_fit_rhlp(const RunConfig& cfg, std::ostream& out) {
  check_ranges(cfg);
  if (cfg.init == "randomized") require_seed(cfg, "fit-rhlp --init randomized");
  const Signal signal = read_input(cfg);
  const FitReport report = em_fit(signal, cfg.K, cfg.p, cfg.q, em_options(cfg));
  finish_fit(cfg, signal, to_stored(report), out);
}

void cmd_fit_dp(const RunConfig& cfg, std::ostream& out) {
  check_ranges(cfg);
  const Signal signal = read_input(cfg);
  const PiecewiseFit fit = fisher_dp(signal, cfg.K, cfg.p, segmentation_options(cfg));
  finish_fit(cfg, signal, to_stored(fit, "piecewise_dp", signal.t()), out);
}

void cmd_fit_dp_iter(const RunConfig& cfg, std::ostream& out) {
  check_ranges(cfg);
  const std::uint64_t seed = require_seed(cfg, "fit-dp-iter");
  const Signal signal = read_input(cfg);
  IterativeOptions iter;
  iter.max_iter = cfg.max_iter;
  iter.tol = cfg.epsilon;
  const PiecewiseFit fit = multi_start_iterative(signal, cfg.K, cfg.p, cfg.restarts, seed, iter,
                                                 segmentation_options(cfg));
  finish_fit(cfg, signal, to_stored(fit, "piecewise_iterative", signal.t(), seed), out);
}

void cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const std::uint64_t seed = require_seed(cfg, "simulate");
  if (cfg.n < 1) throw Error(ErrorKind::InvalidArgument, "--n must be >= 1");
  std::optional<SimulatedSignal> sample;
  if (!cfg.params.empty()) {
    const RhlpParams params = rhlp_params(load_fit_report(cfg.params));
    sample = simulate_rhlp(params, uniform_times(cfg.n, 0.0, 5.0), seed);
  } else {
    const auto scenario = scenario_by_name(cfg.scenario);
    if (!scenario) {
      throw Error(ErrorKind::InvalidArgument,
                  "unknown scenario \"" + cfg.scenario + "\" (expected situation1 or situation2)");
    }
    sample = simulate_piecewise(*scenario, cfg.n, seed);
  }
  std::ofstream file = open_output(cfg.output);
  write_signal_csv(file, sample->signal, &sample->labels);
  out << "wrote " << cfg.output << '\n';
}

void cmd_select_model(const RunConfig& cfg, std::ostream& out) {
  check_ranges(cfg);
  if (cfg.init == "randomized") require_seed(cfg, "select-model --init randomized");
  const Signal signal = read_input(cfg);
  const std::vector<int> Ks = cfg.K_list.empty() ? std::vector<int>{1, 2, 3, 4, 5} : cfg.K_list;
  const std::vector<int> ps = cfg.p_list.empty() ? std::vector<int>{0, 1, 2, 3} : cfg.p_list;
  const ModelSelection selection = select_model(signal, Ks, ps, cfg.q, em_options(cfg));

  std::ofstream file = open_output(cfg.output);
  file << "K,p,q,parameters,status,log_likelihood,bic,selected\n";
  for (const ModelScore& s : selection.table) {
    const bool selected = selection.best && s.ok && selection.best->params.K() == s.K &&
                          selection.best->params.degree == s.p;
    file << s.K << ',' << s.p << ',' << s.q << ',' << s.parameters << ','
         << (s.ok ? "ok" : "failed") << ',' << (s.ok ? format_double(s.log_likelihood) : "")
         << ',' << (s.ok ? format_double(s.bic) : "") << ',' << (selected ? 1 : 0) << '\n';
  }
  if (selection.best && !cfg.report.empty()) {
    StoredReport best = to_stored(*selection.best);
    if (cfg.no_timing) best.runtime_seconds.reset();
    save_fit_report(best, cfg.report);
  }
  if (!selection.best) throw Error(ErrorKind::EmptyComponent, "every candidate model failed to fit");
  out << "selected K=" << selection.best->params.K() << " p=" << selection.best->params.degree
      << " q=" << cfg.q << '\n';
}

void cmd_benchmark(const RunConfig& cfg, std::ostream& out) {
  check_ranges(cfg);
  BenchmarkConfig bench;
  bench.seed = require_seed(cfg, "benchmark");
  for (const std::string& name : cfg.scenarios) {
    const auto scenario = scenario_by_name(name);
    if (!scenario) throw Error(ErrorKind::InvalidArgument, "unknown scenario \"" + name + "\"");
    bench.scenarios.push_back(*scenario);
  }
  bench.n_grid = cfg.n_grid.empty() ? default_n_grid(cfg.full_grid) : cfg.n_grid;
  bench.replicates = cfg.replicates;
  bench.methods.clear();
  for (const std::string& name : cfg.methods) {
    const auto method = method_by_name(name);
    if (!method) throw Error(ErrorKind::InvalidArgument, "unknown method \"" + name + "\"");
    bench.methods.push_back(*method);
  }
  bench.method.K = cfg.K;
  bench.method.p = cfg.p;
  bench.method.q = cfg.q;
  bench.method.em = em_options(cfg);
  bench.method.iterative.max_iter = cfg.max_iter;
  bench.method.iterative.tol = cfg.epsilon;
  bench.method.restarts = cfg.restarts;
  bench.method.segmentation = segmentation_options(cfg);
  bench.record_timing = !cfg.no_timing;

  std::ofstream file = open_output(cfg.output);
  file << "scenario,n,method,misclassification,denoising_mse,runtime_s,failures\n";
  file.flush();
  bench.on_row = [&file](const BenchmarkRow& row) {
    file << row.scenario << ',' << row.n << ',' << method_name(row.method) << ','
         << format_double(row.mean.misclassification_rate) << ','
         << format_double(row.mean.denoising_error) << ',' << format_double(row.mean.runtime_seconds)
         << ',' << row.failures << '\n';
    file.flush();
  };
  run_benchmark(bench);
  out << "wrote " << cfg.output << '\n';
}

void cmd_plot_data(const RunConfig& cfg, std::ostream& out) {
  const StoredReport report = load_fit_report(cfg.report);
  const Signal signal = read_input(cfg);
  const Eigen::VectorXd& t = signal.t();
  const auto n = static_cast<Eigen::Index>(signal.size());

  Eigen::MatrixXd proportions;
  Eigen::VectorXd denoised;
  std::vector<GaussianComponent> components;
  int degree = report.p;
  if (report.model == "rhlp") {
    const RhlpParams params = rhlp_params(report);
    proportions = logistic_proportions(params.logistic, t);
    denoised = denoise(params, t);
    components = params.components;
  } else {
    const PiecewiseFit fit = piecewise_fit(report);
    check_partition(fit.partition, signal.size(), 1);
    const std::vector<int> labels = fit.partition.labels();
    proportions = Eigen::MatrixXd::Zero(n, report.K);
    for (Eigen::Index i = 0; i < n; ++i) proportions(i, labels[static_cast<std::size_t>(i)] - 1) = 1.0;
    denoised = piecewise_expectation(fit, t);
    components = fit.components;
  }
  if (proportions.cols() != static_cast<Eigen::Index>(components.size())) {
    throw Error(ErrorKind::SchemaError, "report components do not match its proportions");
  }

  std::ofstream file = open_output(cfg.output);
  file << "series,component,i,t,value\n";
  auto emit = [&file, &t](const char* series, int component, Eigen::Index i, double value) {
    file << series << ',' << component << ',' << i << ',' << format_double(t[i]) << ','
         << format_double(value) << '\n';
  };
  for (Eigen::Index i = 0; i < n; ++i) emit("original", 0, i, signal.x()[i]);
  for (Eigen::Index i = 0; i < n; ++i) emit("denoised", 0, i, denoised[i]);
  for (std::size_t k = 0; k < components.size(); ++k) {
    const Eigen::VectorXd curve = design_matrix(t, degree) * components[k].beta;
    for (Eigen::Index i = 0; i < n; ++i) emit("component", static_cast<int>(k) + 1, i, curve[i]);
  }
  for (Eigen::Index k = 0; k < proportions.cols(); ++k) {
    for (Eigen::Index i = 0; i < n; ++i) emit("proportion", static_cast<int>(k) + 1, i, proportions(i, k));
  }
  out << "wrote " << cfg.output << '\n';
}

void add_model_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--k", cfg.K, "number of components / segments")->capture_default_str();
  cmd->add_option("--p", cfg.p, "polynomial degree")->capture_default_str();
  cmd->add_option("--variance-floor", cfg.variance_floor, "lower bound on variances")->capture_default_str();
  cmd->add_flag("--normalize-time", cfg.normalize_time, "map times affinely onto [0,5] before fitting");
  cmd->add_flag("--no-timing", cfg.no_timing, "omit wall-clock runtimes so output is reproducible byte for byte");
}

void add_em_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--q", cfg.q, "degree of the logistic time covariate")->capture_default_str();
  cmd->add_option("--epsilon", cfg.epsilon, "EM stopping threshold on the log-likelihood increment")
      ->capture_default_str();
  cmd->add_option("--delta", cfg.delta, "IRLS stopping threshold on the Q1 increment")->capture_default_str();
  cmd->add_option("--max-iter", cfg.max_iter, "maximum EM iterations")->capture_default_str();
  cmd->add_option("--restarts", cfg.restarts, "extra starts for --init randomized")->capture_default_str();
  cmd->add_option("--init", cfg.init, "uniform | randomized")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "random seed");
}

void emit_error(std::ostream& err, std::string_view kind, const std::string& message,
                std::optional<std::size_t> location) {
  nlohmann::json line;
  line["error"] = kind;
  line["message"] = message;
  line["location"] = location ? nlohmann::json(*location) : nlohmann::json(nullptr);
  err << line.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Time-series segmentation with hidden logistic process regression and piecewise "
               "polynomial regression",
               "segreg"};
  app.require_subcommand(1);

  auto* fit_rhlp = app.add_subcommand("fit-rhlp", "fit the hidden logistic process regression model by EM");
  fit_rhlp->add_option("--input", cfg.input, "signal CSV (t,x)")->required();
  fit_rhlp->add_option("--output", cfg.output, "report JSON")->required();
  fit_rhlp->add_option("--denoised-csv", cfg.denoised_csv, "optional t,x,denoised,label CSV");
  add_model_flags(fit_rhlp, cfg);
  add_em_flags(fit_rhlp, cfg);

  auto* fit_dp = app.add_subcommand("fit-dp", "globally optimal piecewise regression (dynamic programming)");
  fit_dp->add_option("--input", cfg.input, "signal CSV (t,x)")->required();
  fit_dp->add_option("--output", cfg.output, "report JSON")->required();
  fit_dp->add_option("--denoised-csv", cfg.denoised_csv, "optional t,x,denoised,label CSV");
  fit_dp->add_option("--min-segment-length", cfg.min_segment_length, "defaults to p+2");
  add_model_flags(fit_dp, cfg);

  auto* fit_iter = app.add_subcommand("fit-dp-iter", "iterative piecewise regression with random restarts");
  fit_iter->add_option("--input", cfg.input, "signal CSV (t,x)")->required();
  fit_iter->add_option("--output", cfg.output, "report JSON")->required();
  fit_iter->add_option("--denoised-csv", cfg.denoised_csv, "optional t,x,denoised,label CSV");
  fit_iter->add_option("--min-segment-length", cfg.min_segment_length, "defaults to p+2");
  fit_iter->add_option("--epsilon", cfg.epsilon, "stop when J decreases by less than this")->capture_default_str();
  fit_iter->add_option("--max-iter", cfg.max_iter, "maximum iterations per start")->capture_default_str();
  fit_iter->add_option("--restarts", cfg.restarts, "random starts besides the uniform one")->capture_default_str();
  fit_iter->add_option("--seed", cfg.seed, "random seed");
  add_model_flags(fit_iter, cfg);

  auto* simulate = app.add_subcommand("simulate", "write a simulated signal with its true labels");
  auto* scenario_opt = simulate->add_option("--scenario", cfg.scenario, "situation1 | situation2");
  auto* params_opt = simulate->add_option("--params", cfg.params, "rhlp report JSON to sample from");
  scenario_opt->excludes(params_opt);
  simulate->add_option("--n", cfg.n, "number of samples")->capture_default_str();
  simulate->add_option("--seed", cfg.seed, "random seed");
  simulate->add_option("--output", cfg.output, "signal CSV (t,x,label)")->required();

  auto* select = app.add_subcommand("select-model", "BIC sweep over K and p with q fixed");
  select->add_option("--input", cfg.input, "signal CSV (t,x)")->required();
  select->add_option("--output", cfg.output, "BIC table CSV")->required();
  select->add_option("--report", cfg.report, "optional report JSON of the selected model");
  select->add_option("--k", cfg.K_list, "candidate K values")->delimiter(',');
  select->add_option("--p", cfg.p_list, "candidate degrees")->delimiter(',');
  select->add_option("--variance-floor", cfg.variance_floor, "lower bound on variances")->capture_default_str();
  select->add_flag("--normalize-time", cfg.normalize_time, "map times affinely onto [0,5] before fitting");
  select->add_flag("--no-timing", cfg.no_timing, "omit the runtime from the selected report");
  add_em_flags(select, cfg);

  auto* bench = app.add_subcommand("benchmark", "simulation study: misclassification, denoising error, runtime");
  bench->add_option("--scenarios,--scenario", cfg.scenarios, "comma-separated scenario names")
      ->delimiter(',');
  bench->add_option("--n", cfg.n_grid, "comma-separated sample sizes")->delimiter(',');
  bench->add_flag("--full-grid", cfg.full_grid, "n = 100, 200, ..., 1000");
  bench->add_option("--replicates", cfg.replicates, "samples per (scenario, n)")->capture_default_str();
  bench->add_option("--methods", cfg.methods, "rhlp,fisher_dp,fisher_iter")->delimiter(',');
  bench->add_option("--output", cfg.output, "criteria table CSV")->required();
  bench->add_option("--min-segment-length", cfg.min_segment_length, "defaults to p+2");
  add_model_flags(bench, cfg);
  add_em_flags(bench, cfg);

  auto* plot = app.add_subcommand("plot-data", "long-format CSV series for plotting a fitted report");
  plot->add_option("--report", cfg.report, "report JSON")->required();
  plot->add_option("--input", cfg.input, "signal CSV the report was fitted on")->required();
  plot->add_option("--output", cfg.output, "long-format CSV")->required();
  plot->add_flag("--normalize-time", cfg.normalize_time, "apply the same time normalization as the fit");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "InvalidArgument", e.what(), std::nullopt);
    return kExitUserError;
  }

  try {
    if (fit_rhlp->parsed()) cmd_fit_rhlp(cfg, out);
    else if (fit_dp->parsed()) cmd_fit_dp(cfg, out);
    else if (fit_iter->parsed()) cmd_fit_dp_iter(cfg, out);
    else if (simulate->parsed()) {
      if (cfg.scenario.empty() && cfg.params.empty()) {
        throw Error(ErrorKind::InvalidArgument, "simulate needs --scenario or --params");
      }
      cmd_simulate(cfg, out);
    }
    else if (select->parsed()) cmd_select_model(cfg, out);
    else if (bench->parsed()) cmd_benchmark(cfg, out);
    else if (plot->parsed()) cmd_plot_data(cfg, out);
  } catch (const Error& e) {
    emit_error(err, to_string(e.kind()), e.what(), e.location());
    return is_numerical(e.kind()) ? kExitNumericalError : kExitUserError;
  } catch (const std::exception& e) {
    emit_error(err, "InternalError", e.what(), std::nullopt);
    return kExitNumericalError;
  }
  return kExitOk;
}

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace segreg::cli
