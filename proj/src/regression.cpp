#include "segreg/regression.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace segreg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::SegmentTooShort: return "SegmentTooShort";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::EmptyComponent: return "EmptyComponent";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaError: return "SchemaError";
  }
  return "Unknown";
}

bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::RankDeficient || kind == ErrorKind::EmptyComponent ||
         kind == ErrorKind::SingularHessian;
}

void validate_samples(const Eigen::VectorXd& t, const Eigen::VectorXd& x) {
  if (t.size() != x.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "time and value vectors differ in length (" + std::to_string(t.size()) +
                    " vs " + std::to_string(x.size()) + ")");
  }
  if (t.size() == 0) throw Error(ErrorKind::InvalidArgument, "signal is empty");
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || !std::isfinite(x[i])) {
      throw Error(ErrorKind::NonFiniteValue,
                  "non-finite sample at index " + std::to_string(i),
                  static_cast<std::size_t>(i));
    }
    if (i > 0 && !(t[i] > t[i - 1])) {
      throw Error(ErrorKind::NonMonotonicTime,
                  "time is not strictly increasing at index " + std::to_string(i),
                  static_cast<std::size_t>(i));
    }
  }
}

Signal::Signal(Eigen::VectorXd t, Eigen::VectorXd x) : t_(std::move(t)), x_(std::move(x)) {
  validate_samples(t_, x_);
}

Signal::Signal(const std::vector<double>& t, const std::vector<double>& x)
    : Signal(Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size())),
             Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()))) {}

double GaussianComponent::mean_at(double t) const {
  // Horner evaluation of beta^T (1, t, ..., t^p)
  double value = 0.0;
  for (Eigen::Index j = beta.size() - 1; j >= 0; --j) value = value * t + beta[j];
  return value;
}

Eigen::VectorXd PolyBasis::expand(double t) const { return polynomial_basis(t, degree); }

Eigen::MatrixXd PolyBasis::design(const Eigen::VectorXd& t) const {
  return design_matrix(t, degree);
}

Eigen::VectorXd polynomial_basis(double t, int degree) {
  if (degree < 0) throw Error(ErrorKind::InvalidArgument, "polynomial degree must be >= 0");
  Eigen::VectorXd r(degree + 1);
  r[0] = 1.0;
  for (int j = 1; j <= degree; ++j) r[j] = r[j - 1] * t;
  return r;
}

Eigen::MatrixXd design_matrix(const Eigen::VectorXd& t, int degree) {
  if (degree < 0) throw Error(ErrorKind::InvalidArgument, "polynomial degree must be >= 0");
  Eigen::MatrixXd design(t.size(), degree + 1);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    design(i, 0) = 1.0;
    for (int j = 1; j <= degree; ++j) design(i, j) = design(i, j - 1) * t[i];
  }
  return design;
}

Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& weights) {
  if (design.rows() != x.size() || x.size() != weights.size()) {
    throw Error(ErrorKind::LengthMismatch, "weighted_least_squares: inconsistent sizes");
  }
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "weights must be finite and non-negative");
  }
  if (!(weights.sum() > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "weights sum to zero");
  }
  const Eigen::VectorXd root_w = weights.cwiseSqrt();
  const Eigen::MatrixXd scaled = root_w.asDiagonal() * design;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  if (qr.rank() < design.cols()) {
    throw Error(ErrorKind::RankDeficient,
                "weighted design has rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(design.cols()));
  }
  return qr.solve(root_w.cwiseProduct(x));
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& x) {
  return weighted_least_squares(design, x, Eigen::VectorXd::Ones(x.size()));
}

double gaussian_log_density(double x, double mean, double sigma2) {
  constexpr double log_two_pi = 1.8378770664093454836;  // log(2*pi)
  const double r = x - mean;
  return -0.5 * (log_two_pi + std::log(sigma2) + r * r / sigma2);
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const double top = values.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((values.array() - top).exp().sum());
}

}  // namespace segreg
