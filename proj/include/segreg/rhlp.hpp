#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segreg/regression.hpp"

namespace segreg {

// Softmax gate over polynomial time covariates v_i = (1, t_i, ..., t_i^q).
// Column k of `w` holds w_k; the last column is the zero reference.
struct LogisticProcess {
  Eigen::MatrixXd w;

  static LogisticProcess zeros(int components, int degree);

  int components() const noexcept { return static_cast<int>(w.cols()); }
  int degree() const noexcept { return static_cast<int>(w.rows()) - 1; }
  // Free coefficients w_1..w_{K-1} stacked component-major.
  Eigen::VectorXd free_parameters() const;
  void set_free_parameters(const Eigen::VectorXd& stacked);
};

struct RhlpParams {
  LogisticProcess logistic;
  std::vector<GaussianComponent> components;
  int degree = 0;  // p, polynomial degree of each regression component

  int K() const noexcept { return static_cast<int>(components.size()); }
  int q() const noexcept { return logistic.degree(); }
};

// Both raise InvalidArgument/LengthMismatch on inconsistent shapes.
void check_params(const RhlpParams& params);

// n x K matrix of pi_ik(w), rows normalized after a max shift.
Eigen::MatrixXd logistic_proportions(const LogisticProcess& logistic, const Eigen::VectorXd& t);
// log pi_ik(w) without forming pi first.
Eigen::MatrixXd log_logistic_proportions(const LogisticProcess& logistic, const Eigen::VectorXd& t);

double mixture_log_likelihood(const RhlpParams& params, const Signal& signal);

// Posterior membership probabilities tau_ik, normalized in log space.
Eigen::MatrixXd e_step(const RhlpParams& params, const Signal& signal);

// Weighted least squares per component with weights tau_.k, then the tau-weighted
// mean squared residual under the new coefficients (floored). Throws EmptyComponent
// when a column of tau has mass below 1e-10.
std::vector<GaussianComponent> m_step_regression(const Eigen::MatrixXd& tau, const Signal& signal,
                                                 int degree,
                                                 double variance_floor = kDefaultVarianceFloor);

// Q_1(w) = sum_i sum_k tau_ik log pi_ik(w).
double irls_objective_q1(const LogisticProcess& logistic, const Eigen::MatrixXd& tau,
                         const Eigen::VectorXd& t);
// Gradient of Q_1 in the free parameters, length (K-1)(q+1).
Eigen::VectorXd irls_gradient(const LogisticProcess& logistic, const Eigen::MatrixXd& tau,
                              const Eigen::VectorXd& t);
// Exact Hessian of Q_1, (K-1)(q+1) square, negative semi-definite.
Eigen::MatrixXd irls_hessian(const LogisticProcess& logistic, const Eigen::VectorXd& t);

struct IrlsOptions {
  double delta = 1e-6;
  int max_iter = 50;
  int max_halvings = 30;
};

struct IrlsResult {
  LogisticProcess logistic;
  std::vector<double> q1_trace;  // Q_1 at the start and after every accepted step
  int iterations = 0;
  bool ridge_used = false;
};

/// Newton-Raphson ascent on Q_1 using the exact Hessian.
///
/// Each full step w - H^{-1} g is halved (up to `max_halvings` times) until Q_1 does not
/// decrease. A singular or indefinite -H is replaced by -H + lambda I with lambda
/// = 1e-6 * trace(-H) / dim. Stops when an accepted step gains no more than `delta`.
IrlsResult irls_solve(const LogisticProcess& init, const Eigen::MatrixXd& tau,
                      const Eigen::VectorXd& t, const IrlsOptions& options = {});

enum class InitStrategy {
  Uniform,     // uniform segments, OLS betas, w = 0, sigma2 = 1
  Randomized,  // uniform plus `restarts` perturbed cut sets; best final likelihood
};

struct EmOptions {
  double epsilon = 1e-6;
  int max_iter = 1000;
  IrlsOptions irls;
  double variance_floor = kDefaultVarianceFloor;
  InitStrategy init = InitStrategy::Uniform;
  int restarts = 10;
  std::uint64_t seed = 0;
};

struct FitReport {
  RhlpParams params;
  std::vector<double> log_likelihood_trace;
  double log_likelihood = 0.0;
  double bic = 0.0;
  std::vector<int> labels;  // 1-based argmax of pi
  Eigen::VectorXd denoised;
  double runtime_seconds = 0.0;
  bool converged = false;
  int em_iterations = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// theta^(0): uniform K-segment OLS betas, zero gate, unit variances.
RhlpParams initial_params(const Signal& signal, int K, int p, int q,
                          const std::vector<std::size_t>& cuts);

FitReport em_fit(const Signal& signal, int K, int p, int q, const EmOptions& options = {});

// x_hat_i = sum_k pi_ik beta_k^T r_i
Eigen::VectorXd denoise(const RhlpParams& params, const Eigen::VectorXd& t);
// 1-based argmax_k pi_ik, ties to the smallest k.
std::vector<int> hard_labels(const RhlpParams& params, const Eigen::VectorXd& t);

// nu(K,p,q) = K(p+q+3) - (q+1)
int free_parameter_count(int K, int p, int q);
double bic(const RhlpParams& params, double log_likelihood, std::size_t n);
double bic(double log_likelihood, int K, int p, int q, std::size_t n);

struct ModelScore {
  int K = 0;
  int p = 0;
  int q = 0;
  bool ok = false;
  double log_likelihood = 0.0;
  double bic = 0.0;
  int parameters = 0;
  std::string error;
};

struct ModelSelection {
  std::optional<FitReport> best;
  std::vector<ModelScore> table;  // ordered by (K, p)
};

// Fits every (K, p) with q fixed; failed fits stay in the table with ok = false.
// The best entry maximizes BIC, ties going to the smaller K, then the smaller p.
ModelSelection select_model(const Signal& signal, const std::vector<int>& K_range,
                            const std::vector<int>& p_range, int q, const EmOptions& options = {});

}  // namespace segreg
