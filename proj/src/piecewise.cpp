#include "segreg/piecewise.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "dp_solver.hpp"

namespace segreg {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kInf = std::numeric_limits<double>::infinity();

double floored_cost(double sse, std::size_t len, double variance_floor) {
  const double sigma2 = std::max(sse / static_cast<double>(len), variance_floor);
  return static_cast<double>(len) * std::log(sigma2) + sse / sigma2;
}

int checked_min_length(int degree, const SegmentationOptions& options) {
  if (degree < 0) throw Error(ErrorKind::InvalidArgument, "polynomial degree must be >= 0");
  const int m = options.min_length_for(degree);
  if (m < degree + 1) {
    throw Error(ErrorKind::InvalidArgument,
                "min_segment_length must be at least p+1 = " + std::to_string(degree + 1));
  }
  if (!(options.variance_floor > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "variance_floor must be positive");
  }
  return m;
}

void check_feasible(std::size_t n, int segments, int min_length) {
  if (segments < 1) throw Error(ErrorKind::InvalidArgument, "number of segments must be >= 1");
  if (n < static_cast<std::size_t>(segments) * static_cast<std::size_t>(min_length)) {
    throw Error(ErrorKind::Infeasible,
                "n = " + std::to_string(n) + " samples cannot hold " + std::to_string(segments) +
                    " segments of at least " + std::to_string(min_length) + " samples");
  }
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::vector<int> Partition::labels() const {
  std::vector<int> out;
  if (gamma.empty()) return out;
  out.reserve(gamma.back());
  for (int k = 0; k < segments(); ++k) out.insert(out.end(), length(k), k + 1);
  return out;
}

CostMatrix::CostMatrix(std::size_t n, int min_segment_length)
    : n_(n), min_length_(min_segment_length), values_(n * (n + 1) / 2, kInf) {}

SegmentFit segment_cost(const Signal& signal, std::size_t a, std::size_t b, int degree,
                        const SegmentationOptions& options) {
  const int m = checked_min_length(degree, options);
  if (!(a < b) || b > signal.size()) {
    throw Error(ErrorKind::InvalidArgument, "segment bounds out of range");
  }
  const std::size_t len = b - a;
  if (len < static_cast<std::size_t>(m)) {
    throw Error(ErrorKind::SegmentTooShort,
                "segment ]" + std::to_string(a) + "," + std::to_string(b) + "] has " +
                    std::to_string(len) + " samples, need " + std::to_string(m));
  }
  const auto first = static_cast<Eigen::Index>(a);
  const auto count = static_cast<Eigen::Index>(len);
  const Eigen::MatrixXd design = design_matrix(signal.t().segment(first, count), degree);
  const Eigen::VectorXd x = signal.x().segment(first, count);

  SegmentFit fit;
  fit.component.beta = least_squares(design, x);
  const double sse = (x - design * fit.component.beta).squaredNorm();
  fit.component.sigma2 = std::max(sse / static_cast<double>(len), options.variance_floor);
  fit.cost = floored_cost(sse, len, options.variance_floor);
  return fit;
}

CostMatrix build_cost_matrix(const Signal& signal, int degree, const SegmentationOptions& options) {
  const int m = checked_min_length(degree, options);
  const std::size_t n = signal.size();
  CostMatrix costs(n, m);
  const Eigen::VectorXd& t = signal.t();
  const Eigen::VectorXd& x = signal.x();
  const int dim = degree + 1;

  // Moments are accumulated per start index in coordinates shifted to the first sample of
  // the segment, and the normal system is solved after unit-diagonal scaling. This keeps
  // short segments far from t = 0 well conditioned.
  std::vector<double> time_moments(static_cast<std::size_t>(2 * degree + 1));
  Eigen::VectorXd cross(dim);
  Eigen::MatrixXd gram(dim, dim);
  Eigen::VectorXd scale(dim);
  Eigen::VectorXd rhs(dim);
  Eigen::LDLT<Eigen::MatrixXd> solver(dim);

  for (std::size_t a = 0; a + static_cast<std::size_t>(m) <= n; ++a) {
    std::fill(time_moments.begin(), time_moments.end(), 0.0);
    cross.setZero();
    double sum_yy = 0.0;
    const double t0 = t[static_cast<Eigen::Index>(a)];
    const double x0 = x[static_cast<Eigen::Index>(a)];

    for (std::size_t i = a; i < n; ++i) {
      const double u = t[static_cast<Eigen::Index>(i)] - t0;
      const double y = x[static_cast<Eigen::Index>(i)] - x0;
      double power = 1.0;
      for (int j = 0; j <= 2 * degree; ++j) {
        time_moments[static_cast<std::size_t>(j)] += power;
        if (j < dim) cross[j] += power * y;
        power *= u;
      }
      sum_yy += y * y;

      const std::size_t len = i - a + 1;
      if (len < static_cast<std::size_t>(m)) continue;

      for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) gram(r, c) = time_moments[static_cast<std::size_t>(r + c)];
      }
      scale = gram.diagonal().cwiseSqrt().cwiseInverse();
      gram = scale.asDiagonal() * gram * scale.asDiagonal();
      rhs = scale.cwiseProduct(cross);
      solver.compute(gram);
      double sse = sum_yy;
      if (solver.info() == Eigen::Success) sse -= rhs.dot(solver.solve(rhs));
      costs.at(a, i + 1) = floored_cost(std::max(sse, 0.0), len, options.variance_floor);
    }
  }
  return costs;
}

DpTable optimal_costs(const CostMatrix& costs, int segments) {
  check_feasible(costs.n(), segments, costs.min_segment_length());
  return detail::solve_segmentation(
      costs.n(), segments, costs.min_segment_length(),
      [&costs](int, std::size_t h, std::size_t b) { return costs(h, b); });
}

Partition backtrack(const DpTable& table) {
  Partition partition;
  partition.gamma.assign(static_cast<std::size_t>(table.segments) + 1, 0);
  partition.gamma.back() = table.n;
  std::size_t b = table.n;
  for (int k = table.segments; k >= 1; --k) {
    b = table.split_at(k, b);
    partition.gamma[static_cast<std::size_t>(k - 1)] = b;
  }
  return partition;
}

void check_partition(const Partition& partition, std::size_t n, int min_length) {
  const auto& g = partition.gamma;
  if (g.size() < 2 || g.front() != 0 || g.back() != n) {
    throw Error(ErrorKind::InvalidArgument, "partition must run from 0 to n = " + std::to_string(n));
  }
  for (std::size_t k = 0; k + 1 < g.size(); ++k) {
    if (g[k + 1] <= g[k] || g[k + 1] - g[k] < static_cast<std::size_t>(min_length)) {
      throw Error(ErrorKind::Infeasible,
                  "segment " + std::to_string(k + 1) + " of the partition is shorter than " +
                      std::to_string(min_length) + " samples",
                  k);
    }
  }
}

PiecewiseFit refit_partition(const Signal& signal, const Partition& partition, int degree,
                             const SegmentationOptions& options) {
  const int m = checked_min_length(degree, options);
  check_partition(partition, signal.size(), m);
  PiecewiseFit fit;
  fit.partition = partition;
  fit.degree = degree;
  fit.criterion_j = 0.0;
  for (int k = 0; k < partition.segments(); ++k) {
    SegmentFit seg = segment_cost(signal, partition.gamma[static_cast<std::size_t>(k)],
                                  partition.gamma[static_cast<std::size_t>(k) + 1], degree, options);
    fit.criterion_j += seg.cost;
    fit.components.push_back(std::move(seg.component));
  }
  fit.log_likelihood = -0.5 * (fit.criterion_j + static_cast<double>(signal.size()) * kLogTwoPi);
  return fit;
}

double partition_criterion(const Signal& signal, const Partition& partition,
                           const std::vector<GaussianComponent>& components) {
  if (static_cast<int>(components.size()) != partition.segments()) {
    throw Error(ErrorKind::LengthMismatch, "one component per segment is required");
  }
  double j = 0.0;
  for (int k = 0; k < partition.segments(); ++k) {
    const GaussianComponent& c = components[static_cast<std::size_t>(k)];
    const double log_s2 = std::log(c.sigma2);
    for (std::size_t i = partition.gamma[static_cast<std::size_t>(k)];
         i < partition.gamma[static_cast<std::size_t>(k) + 1]; ++i) {
      const double r = signal.x()[static_cast<Eigen::Index>(i)] -
                       c.mean_at(signal.t()[static_cast<Eigen::Index>(i)]);
      j += log_s2 + r * r / c.sigma2;
    }
  }
  return j;
}

PiecewiseFit fisher_dp(const Signal& signal, int segments, int degree,
                       const SegmentationOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const int m = checked_min_length(degree, options);
  check_feasible(signal.size(), segments, m);

  const CostMatrix costs = build_cost_matrix(signal, degree, options);
  const DpTable table = optimal_costs(costs, segments);
  PiecewiseFit fit = refit_partition(signal, backtrack(table), degree, options);
  fit.criterion_j = table.at(segments, signal.size());
  fit.log_likelihood = -0.5 * (fit.criterion_j + static_cast<double>(signal.size()) * kLogTwoPi);
  fit.iterations = 1;
  fit.criterion_trace = {fit.criterion_j};
  fit.runtime_seconds = elapsed_since(start);
  return fit;
}

PiecewiseFit iterative_fisher(const Signal& signal, int segments, int degree,
                              const Partition& init, const IterativeOptions& iter,
                              const SegmentationOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const int m = checked_min_length(degree, options);
  const std::size_t n = signal.size();
  check_feasible(n, segments, m);
  if (init.segments() != segments) {
    throw Error(ErrorKind::InvalidArgument, "initial partition has the wrong number of segments");
  }
  check_partition(init, n, m);

  PiecewiseFit fit = refit_partition(signal, init, degree, options);
  std::vector<double> trace{fit.criterion_j};
  int iterations = 0;
  bool converged = false;

  // prefix[k][b] = sum over samples i < b of log s2_k + (x_i - beta_k^T r_i)^2 / s2_k
  std::vector<std::vector<double>> prefix(static_cast<std::size_t>(segments),
                                          std::vector<double>(n + 1, 0.0));
  while (iterations < iter.max_iter) {
    ++iterations;
    for (int k = 0; k < segments; ++k) {
      const GaussianComponent& c = fit.components[static_cast<std::size_t>(k)];
      const double log_s2 = std::log(c.sigma2);
      auto& row = prefix[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < n; ++i) {
        const double r = signal.x()[static_cast<Eigen::Index>(i)] -
                         c.mean_at(signal.t()[static_cast<Eigen::Index>(i)]);
        row[i + 1] = row[i] + log_s2 + r * r / c.sigma2;
      }
    }
    const DpTable table = detail::solve_segmentation(
        n, segments, m, [&prefix](int k, std::size_t h, std::size_t b) {
          const auto& row = prefix[static_cast<std::size_t>(k - 1)];
          return row[b] - row[h];
        });
    const Partition next_partition = backtrack(table);
    if (next_partition == fit.partition) {
      converged = true;
      break;
    }
    PiecewiseFit next = refit_partition(signal, next_partition, degree, options);
    const double decrease = fit.criterion_j - next.criterion_j;
    if (decrease < 0.0) {
      // only reachable through rounding in the prefix sums
      converged = true;
      break;
    }
    fit = std::move(next);
    trace.push_back(fit.criterion_j);
    if (decrease < iter.tol) {
      converged = true;
      break;
    }
  }
  fit.iterations = iterations;
  fit.converged = converged;
  fit.criterion_trace = std::move(trace);
  fit.runtime_seconds = elapsed_since(start);
  return fit;
}

Partition uniform_partition(std::size_t n, int segments) {
  if (segments < 1) throw Error(ErrorKind::InvalidArgument, "number of segments must be >= 1");
  Partition partition;
  for (int k = 0; k <= segments; ++k) {
    partition.gamma.push_back(static_cast<std::size_t>(k) * n / static_cast<std::size_t>(segments));
  }
  return partition;
}

std::optional<Partition> random_partition(std::size_t n, int segments, int min_length,
                                          std::mt19937_64& rng) {
  if (segments < 1) throw Error(ErrorKind::InvalidArgument, "number of segments must be >= 1");
  const auto cuts = static_cast<std::size_t>(segments - 1);
  if (cuts == 0) return Partition{{0, n}};
  if (n < 2 || n - 1 < cuts) return std::nullopt;

  std::vector<std::size_t> interior(n - 1);
  std::iota(interior.begin(), interior.end(), std::size_t{1});
  std::vector<std::size_t> drawn;
  drawn.reserve(cuts);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    drawn.clear();
    std::sample(interior.begin(), interior.end(), std::back_inserter(drawn), cuts, rng);
    std::sort(drawn.begin(), drawn.end());
    Partition candidate;
    candidate.gamma.push_back(0);
    candidate.gamma.insert(candidate.gamma.end(), drawn.begin(), drawn.end());
    candidate.gamma.push_back(n);
    bool ok = true;
    for (int k = 0; k < segments && ok; ++k) {
      ok = candidate.length(k) >= static_cast<std::size_t>(min_length);
    }
    if (ok) return candidate;
  }
  return std::nullopt;
}

PiecewiseFit multi_start_iterative(const Signal& signal, int segments, int degree,
                                   int n_random_starts, std::uint64_t seed,
                                   const IterativeOptions& iter,
                                   const SegmentationOptions& options) {
  if (n_random_starts < 0) throw Error(ErrorKind::InvalidArgument, "n_random_starts must be >= 0");
  const auto start = std::chrono::steady_clock::now();
  const int m = checked_min_length(degree, options);
  const std::size_t n = signal.size();
  check_feasible(n, segments, m);

  PiecewiseFit best = iterative_fisher(signal, segments, degree, uniform_partition(n, segments),
                                       iter, options);
  std::vector<double> criteria{best.criterion_j};
  std::mt19937_64 rng(seed);
  for (int s = 0; s < n_random_starts; ++s) {
    const std::optional<Partition> init = random_partition(n, segments, m, rng);
    if (!init) continue;
    PiecewiseFit candidate = iterative_fisher(signal, segments, degree, *init, iter, options);
    criteria.push_back(candidate.criterion_j);
    if (candidate.criterion_j < best.criterion_j) best = std::move(candidate);
  }
  best.start_criteria = std::move(criteria);
  best.runtime_seconds = elapsed_since(start);
  return best;
}

Eigen::VectorXd piecewise_expectation(const PiecewiseFit& fit, const Eigen::VectorXd& t) {
  const std::vector<int> labels = fit.partition.labels();
  if (labels.size() != static_cast<std::size_t>(t.size())) {
    throw Error(ErrorKind::LengthMismatch, "time vector does not match the fitted partition");
  }
  Eigen::VectorXd out(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    out[i] = fit.components[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1)]
                 .mean_at(t[i]);
  }
  return out;
}

}  // namespace segreg
