#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "segreg/errors.hpp"

namespace segreg {

inline constexpr double kDefaultVarianceFloor = 1e-8;

// A univariate time series: strictly increasing sample times and finite values.
class Signal {
 public:
  Signal(Eigen::VectorXd t, Eigen::VectorXd x);
  Signal(const std::vector<double>& t, const std::vector<double>& x);

  const Eigen::VectorXd& t() const noexcept { return t_; }
  const Eigen::VectorXd& x() const noexcept { return x_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(t_.size()); }

 private:
  Eigen::VectorXd t_;
  Eigen::VectorXd x_;
};

// Checks the Signal invariants on raw vectors, throwing the matching Error.
void validate_samples(const Eigen::VectorXd& t, const Eigen::VectorXd& x);

struct GaussianComponent {
  Eigen::VectorXd beta;  // polynomial coefficients, lowest degree first
  double sigma2 = 1.0;

  double mean_at(double t) const;
};

// Powers of time: (1, t, ..., t^degree).
struct PolyBasis {
  int degree = 0;

  Eigen::VectorXd expand(double t) const;
  Eigen::MatrixXd design(const Eigen::VectorXd& t) const;
  std::size_t size() const noexcept { return static_cast<std::size_t>(degree) + 1; }
};

Eigen::VectorXd polynomial_basis(double t, int degree);
Eigen::MatrixXd design_matrix(const Eigen::VectorXd& t, int degree);
inline Eigen::MatrixXd design_matrix(const Signal& signal, int degree) {
  return design_matrix(signal.t(), degree);
}

/// Minimizes sum_i w_i (x_i - beta^T r_i)^2 where r_i is row i of `design`.
///
/// Solved by column-pivoted Householder QR of the sqrt(w)-scaled design, so the
/// normal matrix is never formed. Throws RankDeficient when the weighted design
/// has numerical rank below its column count, and InvalidArgument for negative
/// weights or zero total weight.
Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& design,
                                       const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& weights);

Eigen::VectorXd least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& x);

double gaussian_log_density(double x, double mean, double sigma2);

// Numerically stable log(sum(exp(values))).
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& values);

}  // namespace segreg
