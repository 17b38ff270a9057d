#include <doctest.h>

#include <cmath>

#include "segreg/regression.hpp"
#include "support.hpp"

using namespace segreg;

TEST_CASE("polynomial_basis expands powers of time") {
  CHECK(polynomial_basis(0.0, 2) == Eigen::Vector3d(1, 0, 0));
  CHECK(polynomial_basis(2.0, 1) == Eigen::Vector2d(1, 2));
  CHECK(polynomial_basis(0.5, 3) == Eigen::Vector4d(1, 0.5, 0.25, 0.125));
  PolyBasis basis{4};
  CHECK(basis.size() == 5);
  CHECK(basis.expand(-1.5)[0] == 1.0);
}

TEST_CASE("design_matrix rows match polynomial_basis") {
  Eigen::MatrixXd expected(2, 2);
  expected << 1, 0, 1, 1;
  CHECK(design_matrix(Eigen::Vector2d(0, 1), 1) == expected);
  CHECK(design_matrix(Eigen::Vector3d(0, 1, 2), 0) == Eigen::MatrixXd::Ones(3, 1));

  oracle::Gen gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int p = gen.integer(0, 4);
    const Eigen::VectorXd t = to_eigen(gen.times(9, gen.uniform(-3, 3)));
    const Eigen::MatrixXd T = design_matrix(t, p);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      CHECK(T.row(i).transpose() == polynomial_basis(t[i], p));
    }
  }
}

TEST_CASE("Signal validation") {
  CHECK_NOTHROW(Signal(std::vector<double>{0, 1}, std::vector<double>{1, 2}));
  auto kind_of = [](auto&& build) {
    try {
      build();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  CHECK(kind_of([] { Signal(std::vector<double>{0, 1}, std::vector<double>{1}); }) ==
        ErrorKind::LengthMismatch);
  CHECK(kind_of([] { Signal(std::vector<double>{}, std::vector<double>{}); }) ==
        ErrorKind::InvalidArgument);
  CHECK(kind_of([] { Signal(std::vector<double>{0, 1, 1}, std::vector<double>{1, 2, 3}); }) ==
        ErrorKind::NonMonotonicTime);
  CHECK(kind_of([] { Signal(std::vector<double>{0, 1}, std::vector<double>{NAN, 2}); }) ==
        ErrorKind::NonFiniteValue);
  try {
    Signal(std::vector<double>{0, 2, 1}, std::vector<double>{1, 2, 3});
  } catch (const Error& e) {
    REQUIRE(e.location().has_value());
    CHECK(*e.location() == 2);
  }
}

TEST_CASE("weighted least squares on a noiseless line") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(7, 0.0, 3.0);
  const Eigen::VectorXd x = (3.0 + 2.0 * t.array()).matrix();
  const Eigen::VectorXd beta = weighted_least_squares(design_matrix(t, 1), x, Eigen::VectorXd::Ones(7));
  CHECK(beta[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(beta[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("zero weights exclude samples") {
  oracle::Gen gen(3);
  const auto t = gen.times(12);
  const auto x = gen.values(12);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(12);
  w.segment(3, 6).setOnes();
  const Eigen::VectorXd full = weighted_least_squares(design_matrix(to_eigen(t), 2), to_eigen(x), w);
  const Eigen::VectorXd sub =
      least_squares(design_matrix(to_eigen(t).segment(3, 6), 2), to_eigen(x).segment(3, 6));
  CHECK((full - sub).norm() <= 1e-9 * sub.norm());
}

TEST_CASE("weighted least squares matches raw normal equations") {
  oracle::Gen gen(5);
  for (int rep = 0; rep < 200; ++rep) {
    const int p = gen.integer(0, 3);
    const std::size_t n = 10;
    const auto t = gen.times(n, gen.uniform(0, 2));
    const auto x = gen.values(n, 5.0);
    std::vector<double> w(n);
    for (double& v : w) v = gen.uniform(0.1, 2.0);
    const auto want = oracle::normal_equations(t, x, w, p);
    const Eigen::VectorXd got = weighted_least_squares(design_matrix(to_eigen(t), p), to_eigen(x), to_eigen(w));
    const Eigen::VectorXd ref = to_eigen(want);
    CHECK((got - ref).norm() <= 1e-9 * std::max(1.0, ref.norm()));

    // unit weights against the closed form, scaled weights leave the solution unchanged
    const Eigen::VectorXd ols = least_squares(design_matrix(to_eigen(t), p), to_eigen(x));
    const Eigen::VectorXd ols_ref = to_eigen(oracle::normal_equations(t, x, std::vector<double>(n, 1.0), p));
    CHECK((ols - ols_ref).norm() <= 1e-9 * std::max(1.0, ols_ref.norm()));
    const double c = gen.uniform(0.01, 100.0);
    const Eigen::VectorXd scaled =
        weighted_least_squares(design_matrix(to_eigen(t), p), to_eigen(x), c * to_eigen(w));
    CHECK((scaled - got).norm() <= 1e-12 * std::max(1.0, got.norm()));
  }
}

TEST_CASE("weighted least squares errors") {
  const Eigen::VectorXd t = Eigen::Vector3d(0, 1, 2);
  const Eigen::VectorXd x = Eigen::Vector3d(1, 2, 3);
  CHECK_THROWS_AS(weighted_least_squares(design_matrix(t, 1), x, Eigen::Vector3d(1, 0, 0)), Error);
  try {
    weighted_least_squares(design_matrix(t, 1), x, Eigen::Vector3d(0, 1, 0));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RankDeficient);
  }
  try {
    weighted_least_squares(design_matrix(t, 1), x, Eigen::Vector3d(1, -1, 1));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidArgument);
  }
  try {
    weighted_least_squares(design_matrix(t, 1), x, Eigen::Vector3d::Zero());
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("gaussian log density") {
  // mpmath, 30 digits
  CHECK(gaussian_log_density(0, 0, 1) == doctest::Approx(-0.918938533204672741780).epsilon(1e-15));
  CHECK(gaussian_log_density(1, 0, 1) == doctest::Approx(-1.418938533204672741780).epsilon(1e-15));
  CHECK(gaussian_log_density(2, 1, 4) == doctest::Approx(-1.73708571376461805119756).epsilon(1e-15));

  // integrates to one over +-8 sigma (composite Simpson)
  const double mean = 1.3, s2 = 2.5, sd = std::sqrt(s2);
  const int m = 4000;
  const double lo = mean - 8 * sd, h = 16 * sd / m;
  double acc = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double f = std::exp(gaussian_log_density(lo + i * h, mean, s2));
    acc += f * (i == 0 || i == m ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  CHECK(std::fabs(acc * h / 3.0 - 1.0) < 1e-6);
}

TEST_CASE("log_sum_exp is shift stable") {
  Eigen::Vector3d v(1000.0, 1000.0, -1e300);
  CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(log_sum_exp(Eigen::Vector2d(std::log(0.25), std::log(0.75))) == doctest::Approx(0.0));
}
