#include "segreg/rhlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>

#include "segreg/piecewise.hpp"

namespace segreg {

namespace {

constexpr double kEmptyComponentMass = 1e-10;

// Row maxima, column by column so the loop vectorizes on column-major storage.
Eigen::VectorXd row_peak(const Eigen::MatrixXd& logits) {
  Eigen::VectorXd peak = logits.col(0);
  for (Eigen::Index k = 1; k < logits.cols(); ++k) peak = peak.cwiseMax(logits.col(k));
  return peak;
}

// glibc exp: Eigen's packet exp is several times slower once arguments reach the
// subnormal range, which is where a sharpening gate spends most of its entries.
double scalar_exp(double v) { return std::exp(v); }

// exp(logits - peak) into `e`; returns the row sums.
Eigen::VectorXd shifted_exp(const Eigen::MatrixXd& logits, const Eigen::VectorXd& peak, Eigen::MatrixXd& e) {
  e.resize(logits.rows(), logits.cols());
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(logits.rows());
  for (Eigen::Index k = 0; k < logits.cols(); ++k) {
    e.col(k) = (logits.col(k) - peak).unaryExpr(&scalar_exp);
    sums += e.col(k);
  }
  return sums;
}

// log sum_k exp(logits_ik) for every row, shifted by the row maximum.
Eigen::VectorXd row_log_normalizer(const Eigen::MatrixXd& logits) {
  const Eigen::VectorXd peak = row_peak(logits);
  Eigen::MatrixXd e;
  const Eigen::VectorXd sums = shifted_exp(logits, peak, e);
  return peak + sums.array().log().matrix();
}

// Row-wise log of the softmax of `logits`.
Eigen::MatrixXd row_log_softmax(const Eigen::MatrixXd& logits) {
  return logits.colwise() - row_log_normalizer(logits);
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd e;
  const Eigen::VectorXd sums = shifted_exp(logits, row_peak(logits), e);
  e.array().colwise() /= sums.array();
  return e;
}

Eigen::MatrixXd gate_logits(const LogisticProcess& logistic, const Eigen::VectorXd& t) {
  return design_matrix(t, logistic.degree()) * logistic.w;
}

// log pi_ik + log N(x_i; beta_k^T r_i, sigma2_k), given log pi
Eigen::MatrixXd add_gaussian_terms(Eigen::MatrixXd out, const RhlpParams& params, const Signal& signal,
                                   const Eigen::MatrixXd& design) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  for (int k = 0; k < params.K(); ++k) {
    const GaussianComponent& c = params.components[static_cast<std::size_t>(k)];
    const Eigen::ArrayXd r = (signal.x() - design * c.beta).array();
    out.col(k).array() += -0.5 * (kLog2Pi + std::log(c.sigma2)) - 0.5 * r.square() / c.sigma2;
  }
  return out;
}

Eigen::MatrixXd log_joint(const RhlpParams& params, const Signal& signal, const Eigen::MatrixXd& design) {
  return add_gaussian_terms(log_logistic_proportions(params.logistic, signal.t()), params, signal, design);
}

// Posteriors into `tau`; returns the log-likelihood. One exp per entry.
double posteriors_into(const Eigen::MatrixXd& joint, Eigen::MatrixXd& tau) {
  const Eigen::VectorXd peak = row_peak(joint);
  const Eigen::VectorXd sums = shifted_exp(joint, peak, tau);
  tau.array().colwise() /= sums.array();
  return peak.sum() + sums.array().log().sum();
}

// IRLS on precomputed covariates. `log_pi` holds log proportions of `init` on entry
// and of the returned process on exit.
IrlsResult irls_core(const LogisticProcess& init, const Eigen::MatrixXd& tau,
                     const Eigen::MatrixXd& covariates, const IrlsOptions& options,
                     Eigen::MatrixXd& log_pi);

Eigen::MatrixXd log_joint(const RhlpParams& params, const Signal& signal) {
  return log_joint(params, signal, design_matrix(signal, params.degree));
}

void check_tau(const Eigen::MatrixXd& tau, Eigen::Index n, int K) {
  if (tau.rows() != n || tau.cols() != K) {
    throw Error(ErrorKind::LengthMismatch,
                "posterior matrix must be " + std::to_string(n) + " x " + std::to_string(K));
  }
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool nearly_equal(const GaussianComponent& a, const GaussianComponent& b) {
  const double scale = 1.0 + std::max(a.beta.norm(), b.beta.norm());
  return (a.beta - b.beta).norm() <= 1e-6 * scale &&
         std::abs(a.sigma2 - b.sigma2) <= 1e-6 * std::max(a.sigma2, b.sigma2);
}

FitReport run_em(const Signal& signal, RhlpParams params, const EmOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  FitReport report;
  check_params(params);
  const Eigen::MatrixXd design = design_matrix(signal, params.degree);
  const Eigen::MatrixXd covariates = design_matrix(signal.t(), params.logistic.degree());
  Eigen::MatrixXd log_pi = log_logistic_proportions(params.logistic, signal.t());
  Eigen::MatrixXd tau;
  double current = posteriors_into(add_gaussian_terms(log_pi, params, signal, design), tau);
  report.log_likelihood_trace.push_back(current);

  for (int m = 1; m <= options.max_iter; ++m) {
    std::vector<GaussianComponent> components;
    try {
      components = m_step_regression(tau, signal, params.degree, options.variance_floor);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyComponent) throw;
      throw Error(ErrorKind::EmptyComponent,
                  std::string(e.what()) + " at EM iteration " + std::to_string(m),
                  static_cast<std::size_t>(m));
    }
    IrlsResult gate = irls_core(params.logistic, tau, covariates, options.irls, log_pi);
    params.components = std::move(components);
    params.logistic = std::move(gate.logistic);

    const double next = posteriors_into(add_gaussian_terms(log_pi, params, signal, design), tau);
    report.log_likelihood_trace.push_back(next);
    report.em_iterations = m;
    const double increment = next - current;
    current = next;
    if (increment < options.epsilon) {
      report.converged = true;
      break;
    }
  }

  report.log_likelihood = current;
  report.bic = bic(params, current, signal.size());
  report.labels = hard_labels(params, signal.t());
  report.denoised = denoise(params, signal.t());
  for (int k = 0; k < params.K(); ++k) {
    for (int l = k + 1; l < params.K(); ++l) {
      if (nearly_equal(params.components[static_cast<std::size_t>(k)],
                       params.components[static_cast<std::size_t>(l)])) {
        report.warnings.push_back("components " + std::to_string(k + 1) + " and " +
                                  std::to_string(l + 1) + " collapsed onto the same parameters");
      }
    }
  }
  if (!report.converged) {
    report.warnings.push_back("EM stopped at max_iter before the likelihood increment fell below epsilon");
  }
  report.params = std::move(params);
  report.seed = options.seed;
  report.runtime_seconds = elapsed_since(start);
  return report;
}

std::optional<std::vector<std::size_t>> perturbed_cuts(std::size_t n, int K, int min_length,
                                                        std::mt19937_64& rng) {
  const Partition uniform = uniform_partition(n, K);
  const auto half_width = static_cast<long long>(n / (2 * static_cast<std::size_t>(K)));
  std::uniform_int_distribution<long long> shift(-half_width, half_width);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<std::size_t> cuts = uniform.gamma;
    bool ok = true;
    for (int k = 1; k < K; ++k) {
      const long long moved = static_cast<long long>(cuts[static_cast<std::size_t>(k)]) + shift(rng);
      if (moved <= 0 || moved >= static_cast<long long>(n)) {
        ok = false;
        break;
      }
      cuts[static_cast<std::size_t>(k)] = static_cast<std::size_t>(moved);
    }
    for (int k = 0; ok && k < K; ++k) {
      const auto a = cuts[static_cast<std::size_t>(k)];
      const auto b = cuts[static_cast<std::size_t>(k) + 1];
      ok = b > a && b - a >= static_cast<std::size_t>(min_length);
    }
    if (ok) return cuts;
  }
  return std::nullopt;
}

}  // namespace

LogisticProcess LogisticProcess::zeros(int components, int degree) {
  if (components < 1 || degree < 0) {
    throw Error(ErrorKind::InvalidArgument, "logistic process needs K >= 1 and q >= 0");
  }
  return LogisticProcess{Eigen::MatrixXd::Zero(degree + 1, components)};
}

Eigen::VectorXd LogisticProcess::free_parameters() const {
  const Eigen::Index dim = w.rows();
  Eigen::VectorXd stacked((w.cols() - 1) * dim);
  for (Eigen::Index k = 0; k + 1 < w.cols(); ++k) stacked.segment(k * dim, dim) = w.col(k);
  return stacked;
}

void LogisticProcess::set_free_parameters(const Eigen::VectorXd& stacked) {
  const Eigen::Index dim = w.rows();
  if (stacked.size() != (w.cols() - 1) * dim) {
    throw Error(ErrorKind::LengthMismatch, "stacked logistic parameters have the wrong length");
  }
  for (Eigen::Index k = 0; k + 1 < w.cols(); ++k) w.col(k) = stacked.segment(k * dim, dim);
  w.col(w.cols() - 1).setZero();
}

void check_params(const RhlpParams& params) {
  if (params.K() < 1) throw Error(ErrorKind::InvalidArgument, "RHLP needs at least one component");
  if (params.degree < 0) throw Error(ErrorKind::InvalidArgument, "polynomial degree must be >= 0");
  if (params.logistic.w.cols() != params.K() || params.logistic.w.rows() < 1) {
    throw Error(ErrorKind::LengthMismatch, "logistic coefficients do not match the component count");
  }
  for (const GaussianComponent& c : params.components) {
    if (c.beta.size() != params.degree + 1) {
      throw Error(ErrorKind::LengthMismatch, "regression coefficients must have length p+1");
    }
    if (!(c.sigma2 > 0.0)) throw Error(ErrorKind::InvalidArgument, "variances must be positive");
  }
}

Eigen::MatrixXd logistic_proportions(const LogisticProcess& logistic, const Eigen::VectorXd& t) {
  return row_softmax(gate_logits(logistic, t));
}

Eigen::MatrixXd log_logistic_proportions(const LogisticProcess& logistic, const Eigen::VectorXd& t) {
  return row_log_softmax(gate_logits(logistic, t));
}

double mixture_log_likelihood(const RhlpParams& params, const Signal& signal) {
  check_params(params);
  return row_log_normalizer(log_joint(params, signal)).sum();
}

Eigen::MatrixXd e_step(const RhlpParams& params, const Signal& signal) {
  check_params(params);
  return row_softmax(log_joint(params, signal));
}

std::vector<GaussianComponent> m_step_regression(const Eigen::MatrixXd& tau, const Signal& signal,
                                                 int degree, double variance_floor) {
  check_tau(tau, signal.t().size(), static_cast<int>(tau.cols()));
  const Eigen::MatrixXd design = design_matrix(signal, degree);
  std::vector<GaussianComponent> components;
  components.reserve(static_cast<std::size_t>(tau.cols()));
  for (Eigen::Index k = 0; k < tau.cols(); ++k) {
    const Eigen::VectorXd weights = tau.col(k);
    const double mass = weights.sum();
    if (!(mass >= kEmptyComponentMass)) {
      throw Error(ErrorKind::EmptyComponent,
                  "component " + std::to_string(k + 1) + " has posterior mass " +
                      std::to_string(mass),
                  static_cast<std::size_t>(k));
    }
    GaussianComponent c;
    c.beta = weighted_least_squares(design, signal.x(), weights);
    const Eigen::VectorXd residual = signal.x() - design * c.beta;
    c.sigma2 = std::max(weights.dot(residual.cwiseAbs2()) / mass, variance_floor);
    components.push_back(std::move(c));
  }
  return components;
}

double irls_objective_q1(const LogisticProcess& logistic, const Eigen::MatrixXd& tau,
                         const Eigen::VectorXd& t) {
  check_tau(tau, t.size(), logistic.components());
  return tau.cwiseProduct(log_logistic_proportions(logistic, t)).sum();
}

namespace {

Eigen::VectorXd gradient_from(const Eigen::MatrixXd& covariates, const Eigen::MatrixXd& tau,
                              const Eigen::MatrixXd& pi) {
  const Eigen::MatrixXd blocks = covariates.transpose() * (tau - pi);
  return LogisticProcess{blocks}.free_parameters();
}

Eigen::MatrixXd hessian_from(const Eigen::MatrixXd& covariates, const Eigen::MatrixXd& pi) {
  const Eigen::Index dim = covariates.cols();
  const Eigen::Index free = pi.cols() - 1;
  Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(free * dim, free * dim);
  for (Eigen::Index k = 0; k < free; ++k) {
    for (Eigen::Index l = k; l < free; ++l) {
      const Eigen::VectorXd weight =
          (k == l) ? Eigen::VectorXd(pi.col(k).array() * (1.0 - pi.col(k).array()))
                   : Eigen::VectorXd(-pi.col(k).array() * pi.col(l).array());
      const Eigen::MatrixXd weighted = covariates.array().colwise() * weight.array();
      const Eigen::MatrixXd block = -(weighted.transpose() * covariates);
      hessian.block(k * dim, l * dim, dim, dim) = block;
      if (l != k) hessian.block(l * dim, k * dim, dim, dim) = block.transpose();
    }
  }
  // exact symmetry regardless of the product's summation order
  const Eigen::MatrixXd symmetric = 0.5 * (hessian + hessian.transpose());
  return symmetric;
}

}  // namespace

Eigen::VectorXd irls_gradient(const LogisticProcess& logistic, const Eigen::MatrixXd& tau,
                              const Eigen::VectorXd& t) {
  check_tau(tau, t.size(), logistic.components());
  const Eigen::MatrixXd covariates = design_matrix(t, logistic.degree());
  return gradient_from(covariates, tau, row_softmax(covariates * logistic.w));
}

Eigen::MatrixXd irls_hessian(const LogisticProcess& logistic, const Eigen::VectorXd& t) {
  const Eigen::MatrixXd covariates = design_matrix(t, logistic.degree());
  return hessian_from(covariates, row_softmax(covariates * logistic.w));
}

namespace {

IrlsResult irls_core(const LogisticProcess& init, const Eigen::MatrixXd& tau,
                     const Eigen::MatrixXd& covariates, const IrlsOptions& options,
                     Eigen::MatrixXd& log_pi) {
  IrlsResult result;
  result.logistic = init;
  double q1 = tau.cwiseProduct(log_pi).sum();
  result.q1_trace.push_back(q1);
  if (init.components() < 2) return result;

  Eigen::VectorXd w = init.free_parameters();
  const auto dim = w.size();
  LogisticProcess candidate = init;
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd candidate_log_pi;

  for (int it = 0; it < options.max_iter; ++it) {
    const Eigen::MatrixXd pi = log_pi.unaryExpr(&scalar_exp);
    const Eigen::VectorXd gradient = gradient_from(covariates, tau, pi);
    const Eigen::MatrixXd curvature = -hessian_from(covariates, pi);

    // Newton direction: w - H^{-1} g = w + (-H)^{-1} g
    llt.compute(curvature);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) {
      result.ridge_used = true;
      double lambda = 1e-6 * std::max(curvature.trace() / static_cast<double>(dim), 1.0e-300);
      if (!(lambda > 0.0) || !std::isfinite(lambda)) lambda = 1e-6;
      for (int attempt = 0; attempt < 20; ++attempt) {
        llt.compute(curvature + lambda * Eigen::MatrixXd::Identity(dim, dim));
        if (llt.info() == Eigen::Success) break;
        lambda *= 10.0;
      }
      if (llt.info() != Eigen::Success) break;
    }
    const Eigen::VectorXd direction = llt.solve(gradient);
    if (!direction.allFinite()) break;

    double step = 1.0;
    bool accepted = false;
    double candidate_q1 = q1;
    for (int h = 0; h <= options.max_halvings; ++h) {
      candidate.set_free_parameters(w + step * direction);
      candidate_log_pi = row_log_softmax(covariates * candidate.w);
      candidate_q1 = tau.cwiseProduct(candidate_log_pi).sum();
      if (candidate_q1 >= q1) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const double gain = candidate_q1 - q1;
    w = candidate.free_parameters();
    result.logistic = candidate;
    log_pi.swap(candidate_log_pi);
    q1 = candidate_q1;
    result.q1_trace.push_back(q1);
    ++result.iterations;
    if (gain <= options.delta) break;
  }
  return result;
}

}  // namespace

IrlsResult irls_solve(const LogisticProcess& init, const Eigen::MatrixXd& tau,
                      const Eigen::VectorXd& t, const IrlsOptions& options) {
  check_tau(tau, t.size(), init.components());
  Eigen::MatrixXd log_pi = log_logistic_proportions(init, t);
  return irls_core(init, tau, design_matrix(t, init.degree()), options, log_pi);
}

RhlpParams initial_params(const Signal& signal, int K, int p, int q,
                          const std::vector<std::size_t>& cuts) {
  if (cuts.size() != static_cast<std::size_t>(K) + 1) {
    throw Error(ErrorKind::InvalidArgument, "initial cuts must have K+1 entries");
  }
  RhlpParams params;
  params.degree = p;
  params.logistic = LogisticProcess::zeros(K, q);
  for (int k = 0; k < K; ++k) {
    const auto a = static_cast<Eigen::Index>(cuts[static_cast<std::size_t>(k)]);
    const auto b = static_cast<Eigen::Index>(cuts[static_cast<std::size_t>(k) + 1]);
    GaussianComponent c;
    c.beta = least_squares(design_matrix(signal.t().segment(a, b - a), p),
                           signal.x().segment(a, b - a));
    c.sigma2 = 1.0;
    params.components.push_back(std::move(c));
  }
  return params;
}

FitReport em_fit(const Signal& signal, int K, int p, int q, const EmOptions& options) {
  if (K < 1 || p < 0 || q < 0) {
    throw Error(ErrorKind::InvalidArgument, "em_fit needs K >= 1, p >= 0, q >= 0");
  }
  const std::size_t n = signal.size();
  if (n < static_cast<std::size_t>(K) * static_cast<std::size_t>(p + 1)) {
    throw Error(ErrorKind::Infeasible, "n = " + std::to_string(n) +
                                           " is too small to initialize " + std::to_string(K) +
                                           " degree-" + std::to_string(p) + " components");
  }
  const auto start = std::chrono::steady_clock::now();
  FitReport best =
      run_em(signal, initial_params(signal, K, p, q, uniform_partition(n, K).gamma), options);

  if (options.init == InitStrategy::Randomized && K > 1) {
    std::mt19937_64 rng(options.seed);
    for (int r = 0; r < options.restarts; ++r) {
      const auto cuts = perturbed_cuts(n, K, p + 2, rng);
      if (!cuts) continue;
      FitReport candidate;
      try {
        candidate = run_em(signal, initial_params(signal, K, p, q, *cuts), options);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyComponent && e.kind() != ErrorKind::RankDeficient) throw;
        continue;
      }
      if (candidate.log_likelihood > best.log_likelihood) best = std::move(candidate);
    }
  }
  best.seed = options.seed;
  best.runtime_seconds = elapsed_since(start);
  return best;
}

Eigen::VectorXd denoise(const RhlpParams& params, const Eigen::VectorXd& t) {
  check_params(params);
  const Eigen::MatrixXd pi = logistic_proportions(params.logistic, t);
  const Eigen::MatrixXd design = design_matrix(t, params.degree);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(t.size());
  for (int k = 0; k < params.K(); ++k) {
    out += pi.col(k).cwiseProduct(design * params.components[static_cast<std::size_t>(k)].beta);
  }
  return out;
}

std::vector<int> hard_labels(const RhlpParams& params, const Eigen::VectorXd& t) {
  // argmax of pi equals argmax of the logits
  const Eigen::MatrixXd logits = gate_logits(params.logistic, t);
  std::vector<int> labels(static_cast<std::size_t>(t.size()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k) {
      if (logits(i, k) > logits(i, best)) best = k;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
  }
  return labels;
}

int free_parameter_count(int K, int p, int q) { return K * (p + q + 3) - (q + 1); }

double bic(double log_likelihood, int K, int p, int q, std::size_t n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "BIC needs n >= 1");
  return log_likelihood -
         0.5 * static_cast<double>(free_parameter_count(K, p, q)) * std::log(static_cast<double>(n));
}

double bic(const RhlpParams& params, double log_likelihood, std::size_t n) {
  return bic(log_likelihood, params.K(), params.degree, params.q(), n);
}

ModelSelection select_model(const Signal& signal, const std::vector<int>& K_range,
                            const std::vector<int>& p_range, int q, const EmOptions& options) {
  if (K_range.empty() || p_range.empty()) {
    throw Error(ErrorKind::InvalidArgument, "model selection needs non-empty K and p ranges");
  }
  std::vector<int> Ks = K_range;
  std::vector<int> ps = p_range;
  std::sort(Ks.begin(), Ks.end());
  Ks.erase(std::unique(Ks.begin(), Ks.end()), Ks.end());
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());

  ModelSelection selection;
  for (int K : Ks) {
    for (int p : ps) {
      ModelScore score;
      score.K = K;
      score.p = p;
      score.q = q;
      score.parameters = free_parameter_count(K, p, q);
      try {
        FitReport report = em_fit(signal, K, p, q, options);
        score.ok = true;
        score.log_likelihood = report.log_likelihood;
        score.bic = report.bic;
        if (!selection.best || report.bic > selection.best->bic) selection.best = std::move(report);
      } catch (const Error& e) {
        score.ok = false;
        score.error = std::string(to_string(e.kind())) + ": " + e.what();
      }
      selection.table.push_back(std::move(score));
    }
  }
  return selection;
}

}  // namespace segreg
