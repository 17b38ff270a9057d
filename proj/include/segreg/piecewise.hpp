#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "segreg/regression.hpp"

namespace segreg {

// Segment boundaries gamma = (0, ..., n). Segment k covers samples
// gamma[k] .. gamma[k+1]-1 (0-based), i.e. the half-open index range ]gamma_k, gamma_{k+1}].
struct Partition {
  std::vector<std::size_t> gamma;

  int segments() const noexcept { return gamma.empty() ? 0 : static_cast<int>(gamma.size()) - 1; }
  std::size_t length(int k) const { return gamma[k + 1] - gamma[k]; }

  // 1-based component label for every sample.
  std::vector<int> labels() const;
  bool operator==(const Partition&) const = default;
};

struct SegmentationOptions {
  std::optional<int> min_segment_length;  // defaults to p + 2
  double variance_floor = kDefaultVarianceFloor;

  int min_length_for(int degree) const {
    return min_segment_length.value_or(degree + 2);
  }
};

struct PiecewiseFit {
  Partition partition;
  std::vector<GaussianComponent> components;
  int degree = 0;
  double criterion_j = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = true;
  // J after every regression step of the iterative variant.
  std::vector<double> criterion_trace;
  // Final J of each start, in start order (multi-start only).
  std::vector<double> start_criteria;
  double runtime_seconds = 0.0;

  int segments() const noexcept { return partition.segments(); }
};

struct SegmentFit {
  double cost = 0.0;
  GaussianComponent component;
};

// One-segment costs C_1(a, b) for the segment ]a, b], 0 <= a < b <= n, in packed
// upper-triangular storage. Infeasible entries (b - a < min length) hold +inf.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t n, int min_segment_length);

  std::size_t n() const noexcept { return n_; }
  int min_segment_length() const noexcept { return min_length_; }
  bool feasible(std::size_t a, std::size_t b) const noexcept {
    return a < b && b <= n_ && b - a >= static_cast<std::size_t>(min_length_);
  }
  double operator()(std::size_t a, std::size_t b) const { return values_[index(a, b)]; }
  double& at(std::size_t a, std::size_t b) { return values_[index(a, b)]; }

 private:
  // row a stores b = a+1..n
  std::size_t index(std::size_t a, std::size_t b) const noexcept {
    const std::size_t row_offset = a == 0 ? 0 : a * n_ - a * (a - 1) / 2;
    return row_offset + (b - a - 1);
  }

  std::size_t n_ = 0;
  int min_length_ = 1;
  std::vector<double> values_;
};

// Optimal prefix costs C_k(0, b) and the split index that attains each of them.
struct DpTable {
  int segments = 0;
  std::size_t n = 0;
  std::vector<double> cost;        // segments x (n + 1), row k-1 holds C_k(0, .)
  std::vector<std::size_t> split;  // argmin h, same layout

  double at(int k, std::size_t b) const { return cost[static_cast<std::size_t>(k - 1) * (n + 1) + b]; }
  std::size_t split_at(int k, std::size_t b) const {
    return split[static_cast<std::size_t>(k - 1) * (n + 1) + b];
  }
};

/// Fits ordinary least squares on samples a..b-1 and returns
/// sum_i [log s2 + (x_i - beta^T r_i)^2 / s2] with s2 the floored mean squared residual.
SegmentFit segment_cost(const Signal& signal, std::size_t a, std::size_t b, int degree,
                        const SegmentationOptions& options = {});

CostMatrix build_cost_matrix(const Signal& signal, int degree,
                             const SegmentationOptions& options = {});

// Runs the recursion C_k(0,b) = min_h C_{k-1}(0,h) + C_1(h,b); ties go to the smallest h.
DpTable optimal_costs(const CostMatrix& costs, int segments);

Partition backtrack(const DpTable& table);

// Per-segment OLS and floored variance for a fixed partition, with J and the log-likelihood.
PiecewiseFit refit_partition(const Signal& signal, const Partition& partition, int degree,
                             const SegmentationOptions& options = {});

// J(psi, gamma) for fixed component parameters; component k is assigned to segment k.
double partition_criterion(const Signal& signal, const Partition& partition,
                           const std::vector<GaussianComponent>& components);

// Globally optimal K-segment fit (Fisher's algorithm). Throws Infeasible when n < K * min length.
PiecewiseFit fisher_dp(const Signal& signal, int segments, int degree,
                       const SegmentationOptions& options = {});

struct IterativeOptions {
  int max_iter = 100;
  double tol = 1e-6;
};

// Alternates per-segment regression with DP re-segmentation under fixed parameters.
PiecewiseFit iterative_fisher(const Signal& signal, int segments, int degree,
                              const Partition& init, const IterativeOptions& iter = {},
                              const SegmentationOptions& options = {});

PiecewiseFit multi_start_iterative(const Signal& signal, int segments, int degree,
                                   int n_random_starts, std::uint64_t seed,
                                   const IterativeOptions& iter = {},
                                   const SegmentationOptions& options = {});

// K segments of (nearly) equal length: gamma_k = floor(k n / K).
Partition uniform_partition(std::size_t n, int segments);

// K-1 distinct interior cuts drawn uniformly without replacement, redrawn until every
// segment has at least `min_length` samples. Empty after 1000 failed draws.
std::optional<Partition> random_partition(std::size_t n, int segments, int min_length,
                                          std::mt19937_64& rng);

void check_partition(const Partition& partition, std::size_t n, int min_length);

// beta_{z_i}^T r_i for the segment each sample belongs to.
Eigen::VectorXd piecewise_expectation(const PiecewiseFit& fit, const Eigen::VectorXd& t);

}  // namespace segreg
