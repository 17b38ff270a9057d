#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segreg/piecewise.hpp"
#include "segreg/regression.hpp"
#include "segreg/rhlp.hpp"

namespace segreg {

struct PiecewiseScenario {
  std::string name;
  std::vector<double> transition_times;  // (span start, ..., span end), seconds
  std::vector<GaussianComponent> components;
  int degree = 2;

  double span_start() const { return transition_times.front(); }
  double span_end() const { return transition_times.back(); }
  int K() const noexcept { return static_cast<int>(components.size()); }
};

// Transitions (0, 0.6, 4, 5) s, quadratic components with variances 4, 10, 15.
PiecewiseScenario situation1();
// Transitions (0, 1, 3.5, 5) s, quadratic components with variances 4, 10, 15.
PiecewiseScenario situation2();
std::optional<PiecewiseScenario> scenario_by_name(const std::string& name);

void check_scenario(const PiecewiseScenario& scenario);

struct SimulatedSignal {
  Signal signal;
  std::vector<int> labels;  // 1-based true component of every sample
};

// t_i = start + (i-1) dt with dt = span / n, i = 1..n.
Eigen::VectorXd uniform_times(std::size_t n, double start, double end);

// Segment boundaries gamma_k = round((tau_k - start) / dt) for n samples.
Partition scenario_partition(const PiecewiseScenario& scenario, std::size_t n);

SimulatedSignal simulate_piecewise(const PiecewiseScenario& scenario, std::size_t n,
                                   std::uint64_t seed);

// The noiseless segment polynomial at every sample of an n-point grid.
Eigen::VectorXd scenario_expectation(const PiecewiseScenario& scenario, std::size_t n);

// z_i ~ categorical(pi_i.), x_i ~ N(beta_{z_i}^T r_i, sigma2_{z_i}).
SimulatedSignal simulate_rhlp(const RhlpParams& params, const Eigen::VectorXd& t,
                              std::uint64_t seed);

// Renames labels 1, 2, ... in order of first appearance.
std::vector<int> relabel_by_first_appearance(const std::vector<int>& labels);

// Fraction of disagreeing samples once both labelings are renamed by first appearance.
double misclassification_rate(const std::vector<int>& truth, const std::vector<int>& estimate);

// (1/n) sum_i (truth_i - estimate_i)^2 over two expectation curves.
double denoising_error(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimate);

// Times of the first sample of every new run of labels (interior transitions only).
std::vector<double> transition_times(const std::vector<int>& labels, const Eigen::VectorXd& t);

struct EvalResult {
  double misclassification_rate = 0.0;
  double denoising_error = 0.0;
  double runtime_seconds = 0.0;
};

enum class Method { Rhlp, FisherDp, FisherIterative };

std::string_view method_name(Method method);
std::optional<Method> method_by_name(const std::string& name);

struct MethodConfig {
  int K = 3;
  int p = 2;
  int q = 1;
  EmOptions em;
  IterativeOptions iterative;
  int restarts = 10;
  SegmentationOptions segmentation;
};

struct CellEvaluation {
  EvalResult result;
  std::vector<int> labels;
  Eigen::VectorXd expectation;
};

// Fits `method` to one simulated signal and scores it against the truth.
CellEvaluation evaluate_method(Method method, const PiecewiseScenario& scenario,
                               const SimulatedSignal& sample, const MethodConfig& config,
                               std::uint64_t seed);

struct BenchmarkRow {
  std::string scenario;
  std::size_t n = 0;
  Method method = Method::Rhlp;
  EvalResult mean;
  int completed = 0;
  int failures = 0;
};

struct BenchmarkConfig {
  std::vector<PiecewiseScenario> scenarios;
  std::vector<std::size_t> n_grid;
  int replicates = 20;
  std::vector<Method> methods{Method::Rhlp, Method::FisherDp, Method::FisherIterative};
  std::uint64_t seed = 0;
  MethodConfig method;
  bool record_timing = true;
  // Called with each finished row, in output order.
  std::function<void(const BenchmarkRow&)> on_row;
};


// Seed of replicate r for (scenario, n), independent of evaluation order.
std::uint64_t cell_seed(std::uint64_t master, const std::string& scenario, std::size_t n,
                        int replicate);

// The n = 100..1000 step 100 grid, or {100, 500, 1000} when `full` is false.
std::vector<std::size_t> default_n_grid(bool full);

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config);

}  // namespace segreg
