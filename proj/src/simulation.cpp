#include "segreg/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>

namespace segreg {

namespace {

GaussianComponent quadratic(double b0, double b1, double b2, double sigma2) {
  GaussianComponent c;
  c.beta = Eigen::Vector3d(b0, b1, b2);
  c.sigma2 = sigma2;
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

PiecewiseScenario situation1() {
  return PiecewiseScenario{"situation1",
                           {0.0, 0.6, 4.0, 5.0},
                           {quadratic(735, -1320, 1000, 4), quadratic(270, 60, -15, 10),
                            quadratic(320, 40, -4, 15)},
                           2};
}

PiecewiseScenario situation2() {
  return PiecewiseScenario{"situation2",
                           {0.0, 1.0, 3.5, 5.0},
                           {quadratic(65, -70, 35, 4), quadratic(15, 20, -5, 10),
                            quadratic(-90, 50, -5, 15)},
                           2};
}

std::optional<PiecewiseScenario> scenario_by_name(const std::string& name) {
  if (name == "situation1") return situation1();
  if (name == "situation2") return situation2();
  return std::nullopt;
}

void check_scenario(const PiecewiseScenario& scenario) {
  const auto& tt = scenario.transition_times;
  if (tt.size() < 2 || tt.size() != scenario.components.size() + 1) {
    throw Error(ErrorKind::InvalidArgument, "scenario needs K+1 transition times");
  }
  for (std::size_t k = 1; k < tt.size(); ++k) {
    if (!(tt[k] > tt[k - 1])) {
      throw Error(ErrorKind::InvalidArgument, "scenario transition times must increase");
    }
  }
  for (const GaussianComponent& c : scenario.components) {
    if (c.beta.size() != scenario.degree + 1 || !(c.sigma2 >= 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "scenario component has the wrong shape");
    }
  }
}

Eigen::VectorXd uniform_times(std::size_t n, double start, double end) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "need at least one sample");
  const double dt = (end - start) / static_cast<double>(n);
  Eigen::VectorXd t(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) t[static_cast<Eigen::Index>(i)] = start + static_cast<double>(i) * dt;
  return t;
}

Partition scenario_partition(const PiecewiseScenario& scenario, std::size_t n) {
  check_scenario(scenario);
  const double dt = (scenario.span_end() - scenario.span_start()) / static_cast<double>(n);
  Partition partition;
  for (double time : scenario.transition_times) {
    partition.gamma.push_back(
        static_cast<std::size_t>(std::llround((time - scenario.span_start()) / dt)));
  }
  partition.gamma.front() = 0;
  partition.gamma.back() = n;
  check_partition(partition, n, 1);
  return partition;
}

Eigen::VectorXd scenario_expectation(const PiecewiseScenario& scenario, std::size_t n) {
  const Partition partition = scenario_partition(scenario, n);
  const Eigen::VectorXd t = uniform_times(n, scenario.span_start(), scenario.span_end());
  const std::vector<int> labels = partition.labels();
  Eigen::VectorXd mean(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    mean[i] = scenario.components[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1)]
                  .mean_at(t[i]);
  }
  return mean;
}

SimulatedSignal simulate_piecewise(const PiecewiseScenario& scenario, std::size_t n,
                                   std::uint64_t seed) {
  const Partition partition = scenario_partition(scenario, n);
  const Eigen::VectorXd t = uniform_times(n, scenario.span_start(), scenario.span_end());
  const Eigen::VectorXd mean = scenario_expectation(scenario, n);
  std::vector<int> labels = partition.labels();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::VectorXd x(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double sigma2 =
        scenario.components[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1)].sigma2;
    x[i] = mean[i] + std::sqrt(sigma2) * noise(rng);
  }
  return SimulatedSignal{Signal(t, x), std::move(labels)};
}

SimulatedSignal simulate_rhlp(const RhlpParams& params, const Eigen::VectorXd& t,
                              std::uint64_t seed) {
  check_params(params);
  const Eigen::MatrixXd pi = logistic_proportions(params.logistic, t);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<int> labels(static_cast<std::size_t>(t.size()));
  Eigen::VectorXd x(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double u = uniform(rng);
    int z = params.K() - 1;
    double cumulative = 0.0;
    for (int k = 0; k < params.K(); ++k) {
      cumulative += pi(i, k);
      if (u < cumulative) {
        z = k;
        break;
      }
    }
    const GaussianComponent& c = params.components[static_cast<std::size_t>(z)];
    labels[static_cast<std::size_t>(i)] = z + 1;
    x[i] = c.mean_at(t[i]) + std::sqrt(c.sigma2) * noise(rng);
  }
  return SimulatedSignal{Signal(t, x), std::move(labels)};
}

std::vector<int> relabel_by_first_appearance(const std::vector<int>& labels) {
  std::map<int, int> renamed;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int label : labels) {
    auto [it, inserted] = renamed.try_emplace(label, static_cast<int>(renamed.size()) + 1);
    out.push_back(it->second);
  }
  return out;
}

double misclassification_rate(const std::vector<int>& truth, const std::vector<int>& estimate) {
  if (truth.size() != estimate.size()) {
    throw Error(ErrorKind::LengthMismatch, "label sequences differ in length");
  }
  if (truth.empty()) return 0.0;
  const std::vector<int> a = relabel_by_first_appearance(truth);
  const std::vector<int> b = relabel_by_first_appearance(estimate);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mismatches += a[i] != b[i] ? 1 : 0;
  return static_cast<double>(mismatches) / static_cast<double>(a.size());
}

double denoising_error(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimate) {
  if (truth.size() != estimate.size()) {
    throw Error(ErrorKind::LengthMismatch, "expectation curves differ in length");
  }
  if (truth.size() == 0) return 0.0;
  return (truth - estimate).squaredNorm() / static_cast<double>(truth.size());
}

std::vector<double> transition_times(const std::vector<int>& labels, const Eigen::VectorXd& t) {
  if (labels.size() != static_cast<std::size_t>(t.size())) {
    throw Error(ErrorKind::LengthMismatch, "labels and times differ in length");
  }
  std::vector<double> out;
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] != labels[i - 1]) out.push_back(t[static_cast<Eigen::Index>(i)]);
  }
  return out;
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::Rhlp: return "rhlp";
    case Method::FisherDp: return "fisher_dp";
    case Method::FisherIterative: return "fisher_iter";
  }
  return "unknown";
}

std::optional<Method> method_by_name(const std::string& name) {
  for (Method m : {Method::Rhlp, Method::FisherDp, Method::FisherIterative}) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

CellEvaluation evaluate_method(Method method, const PiecewiseScenario& scenario,
                               const SimulatedSignal& sample, const MethodConfig& config,
                               std::uint64_t seed) {
  const Signal& signal = sample.signal;
  CellEvaluation eval;
  switch (method) {
    case Method::Rhlp: {
      EmOptions em = config.em;
      em.seed = seed;
      const FitReport report = em_fit(signal, config.K, config.p, config.q, em);
      eval.labels = report.labels;
      eval.expectation = report.denoised;
      eval.result.runtime_seconds = report.runtime_seconds;
      break;
    }
    case Method::FisherDp:
    case Method::FisherIterative: {
      const PiecewiseFit fit =
          method == Method::FisherDp
              ? fisher_dp(signal, config.K, config.p, config.segmentation)
              : multi_start_iterative(signal, config.K, config.p, config.restarts, seed,
                                      config.iterative, config.segmentation);
      eval.labels = fit.partition.labels();
      eval.expectation = piecewise_expectation(fit, signal.t());
      eval.result.runtime_seconds = fit.runtime_seconds;
      break;
    }
  }
  eval.result.misclassification_rate = misclassification_rate(sample.labels, eval.labels);
  eval.result.denoising_error =
      denoising_error(scenario_expectation(scenario, signal.size()), eval.expectation);
  return eval;
}

std::uint64_t cell_seed(std::uint64_t master, const std::string& scenario, std::size_t n,
                        int replicate) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ fnv1a(scenario));
  h = splitmix64(h ^ static_cast<std::uint64_t>(n));
  return splitmix64(h ^ static_cast<std::uint64_t>(replicate));
}

std::vector<std::size_t> default_n_grid(bool full) {
  if (!full) return {100, 500, 1000};
  std::vector<std::size_t> grid;
  for (std::size_t n = 100; n <= 1000; n += 100) grid.push_back(n);
  return grid;
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config) {
  if (config.scenarios.empty() || config.n_grid.empty() || config.methods.empty() ||
      config.replicates < 1) {
    throw Error(ErrorKind::InvalidArgument, "benchmark grids must be non-empty");
  }
  std::vector<BenchmarkRow> rows;
  for (const PiecewiseScenario& scenario : config.scenarios) {
    check_scenario(scenario);
    for (std::size_t n : config.n_grid) {
      std::vector<BenchmarkRow> cell(config.methods.size());
      for (std::size_t m = 0; m < config.methods.size(); ++m) {
        cell[m].scenario = scenario.name;
        cell[m].n = n;
        cell[m].method = config.methods[m];
      }
      for (int r = 0; r < config.replicates; ++r) {
        const std::uint64_t seed = cell_seed(config.seed, scenario.name, n, r);
        const SimulatedSignal sample = simulate_piecewise(scenario, n, seed);
        for (std::size_t m = 0; m < config.methods.size(); ++m) {
          BenchmarkRow& row = cell[m];
          try {
            const CellEvaluation eval =
                evaluate_method(config.methods[m], scenario, sample, config.method, seed);
            row.mean.misclassification_rate += eval.result.misclassification_rate;
            row.mean.denoising_error += eval.result.denoising_error;
            row.mean.runtime_seconds += config.record_timing ? eval.result.runtime_seconds : 0.0;
            ++row.completed;
          } catch (const Error&) {
            ++row.failures;
          }
        }
      }
      for (BenchmarkRow& row : cell) {
        if (row.completed > 0) {
          const double count = row.completed;
          row.mean.misclassification_rate /= count;
          row.mean.denoising_error /= count;
          row.mean.runtime_seconds /= count;
        } else {
          row.mean = EvalResult{std::nan(""), std::nan(""), std::nan("")};
        }
        if (config.on_row) config.on_row(row);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace segreg
