// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "segreg/cli.hpp"
#include "segreg/piecewise.hpp"
#include "segreg/rhlp.hpp"
#include "segreg/simulation.hpp"
#include "support.hpp"

using namespace segreg;

namespace {

constexpr std::uint64_t kMasterSeed = 2024;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// 1. fisher_dp against exhaustive enumeration
Outcome dp_optimality() {
  oracle::Gen gen(kMasterSeed + 1);
  int ok = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const int K = gen.integer(2, 3);
    const int p = gen.integer(0, 1);
    const int min_n = K * (p + 2);
    const std::size_t n = static_cast<std::size_t>(gen.integer(std::max(min_n, 6), 16));
    const auto t = gen.times(n);
    const auto x = gen.values(n, gen.uniform(0.5, 5.0));
    const double got = fisher_dp(Signal(t, x), K, p).criterion_j;
    const double want = oracle::exhaustive_min_criterion(t, x, K, p, p + 2);
    const double dev = std::fabs(got - want);
    worst = std::max(worst, dev);
    ok += dev <= 1e-9;
  }
  return {ok == 200, std::to_string(ok) + "/200 within 1e-9, max |dJ| " + fmt("%.2e", worst)};
}

// 2. EM never decreases the log-likelihood
Outcome em_ascent() {
  int runs = 0, ok = 0;
  double worst = INFINITY;
  for (const auto& sc : {situation1(), situation2()}) {
    for (int r = 0; r < 25; ++r) {
      const SimulatedSignal sim = simulate_piecewise(sc, 500, cell_seed(kMasterSeed, sc.name, 500, r));
      const FitReport fit = em_fit(sim.signal, 3, 2, 1);
      bool mono = true;
      for (std::size_t m = 1; m < fit.log_likelihood_trace.size(); ++m) {
        const double inc = fit.log_likelihood_trace[m] - fit.log_likelihood_trace[m - 1];
        worst = std::min(worst, inc);
        mono &= inc >= -1e-8;
      }
      ++runs;
      ok += mono;
    }
  }
  return {ok == runs && runs == 50,
          std::to_string(ok) + "/" + std::to_string(runs) + " traces monotone, min increment " + fmt("%.2e", worst)};
}

// 3. IRLS gradient / Hessian against finite differences, Q1 ascent
Outcome irls_correctness() {
  oracle::Gen gen(kMasterSeed + 3);
  int ok = 0;
  double worst_g = 0.0, worst_h = 0.0, worst_q = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int K = gen.integer(2, 4);
    const int q = gen.integer(0, 2);
    const std::size_t n = static_cast<std::size_t>(gen.integer(20, 200));
    Eigen::VectorXd t(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = 5.0 * static_cast<double>(i) / static_cast<double>(n);
    LogisticProcess lp = LogisticProcess::zeros(K, q);
    Eigen::VectorXd free = lp.free_parameters();
    for (Eigen::Index j = 0; j < free.size(); ++j) free[j] = gen.uniform(-1.0, 1.0);
    lp.set_free_parameters(free);
    const Eigen::MatrixXd tau = to_eigen(gen.simplex_rows(n, K));

    auto q1_at = [&](const std::vector<double>& v) {
      LogisticProcess l = lp;
      l.set_free_parameters(to_eigen(v));
      return irls_objective_q1(l, tau, t);
    };
    const Eigen::VectorXd g = irls_gradient(lp, tau, t);
    const Eigen::VectorXd g_fd = to_eigen(oracle::central_gradient(q1_at, to_std(free), 1e-5));
    const double rel_g = (g - g_fd).norm() / std::max(g.norm(), 1e-8);

    const Eigen::MatrixXd H = irls_hessian(lp, t);
    Eigen::MatrixXd H_fd(H.rows(), H.cols());
    for (Eigen::Index j = 0; j < free.size(); ++j) {
      auto gj = [&](const std::vector<double>& v) {
        LogisticProcess l = lp;
        l.set_free_parameters(to_eigen(v));
        return irls_gradient(l, tau, t)[j];
      };
      H_fd.row(j) = to_eigen(oracle::central_gradient(gj, to_std(free), 1e-5)).transpose();
    }
    const double rel_h = (H - H_fd).norm() / std::max(H.norm(), 1e-8);

    const IrlsResult res = irls_solve(lp, tau, t);
    double drop = 0.0;
    for (std::size_t s = 1; s < res.q1_trace.size(); ++s) drop = std::min(drop, res.q1_trace[s] - res.q1_trace[s - 1]);

    worst_g = std::max(worst_g, rel_g);
    worst_h = std::max(worst_h, rel_h);
    worst_q = std::min(worst_q, drop);
    ok += rel_g <= 1e-5 && rel_h <= 1e-4 && drop >= 0.0;
  }
  return {ok == 100, std::to_string(ok) + "/100; max rel grad err " + fmt("%.2e", worst_g) + ", max rel Hessian err " +
                         fmt("%.2e", worst_h) + ", worst Q1 change " + fmt("%.2e", worst_q)};
}

// Error of each true interior transition: matched in order when the counts agree,
// otherwise the distance to the nearest estimate (the full span if there is none).
std::vector<double> transition_errors(const std::vector<double>& truth, const std::vector<double>& est, double span) {
  std::vector<double> out;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (est.size() == truth.size()) {
      out.push_back(std::fabs(est[j] - truth[j]));
      continue;
    }
    double best = span;
    for (double e : est) best = std::min(best, std::fabs(e - truth[j]));
    out.push_back(best);
  }
  return out;
}

// 4. RHLP transition times at n = 1000
Outcome transition_recovery() {
  bool pass = true;
  std::string detail;
  for (const auto& sc : {situation1(), situation2()}) {
    const std::vector<double> truth(sc.transition_times.begin() + 1, sc.transition_times.end() - 1);
    std::vector<double> rhlp_err, dp_err;
    for (int r = 0; r < 20; ++r) {
      const SimulatedSignal sim = simulate_piecewise(sc, 1000, cell_seed(kMasterSeed, sc.name, 1000, r));
      const FitReport fit = em_fit(sim.signal, 3, 2, 1);
      const PiecewiseFit dp = fisher_dp(sim.signal, 3, 2);
      const double span = sc.span_end() - sc.span_start();
      for (double e : transition_errors(truth, transition_times(fit.labels, sim.signal.t()), span)) rhlp_err.push_back(e);
      for (double e : transition_errors(truth, transition_times(dp.partition.labels(), sim.signal.t()), span)) {
        dp_err.push_back(e);
      }
    }
    const double mr = median(rhlp_err), md = median(dp_err);
    const bool ok = mr <= 0.15 && mr <= 2.0 * md;
    pass &= ok;
    detail += sc.name + ": RHLP median " + fmt("%.4f", mr) + " s, DP median " + fmt("%.4f", md) + " s; ";
  }
  return {pass, detail + "require <= 0.15 s and <= 2x DP"};
}

// 5. orderings over the desk grid
Outcome criterion_orderings() {
  BenchmarkConfig cfg;
  cfg.scenarios = {situation1(), situation2()};
  cfg.n_grid = default_n_grid(false);
  cfg.replicates = 20;
  cfg.methods = {Method::Rhlp, Method::FisherDp};
  cfg.seed = kMasterSeed;
  const auto rows = run_benchmark(cfg);

  int cells = 0, close = 0, lower_mse = 0, faster = 0, large = 0, failures = 0;
  std::string detail;
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    const BenchmarkRow& r = rows[i];
    const BenchmarkRow& d = rows[i + 1];
    failures += r.failures + d.failures;
    ++cells;
    const double gap = std::fabs(r.mean.misclassification_rate - d.mean.misclassification_rate);
    close += gap <= 0.02;
    lower_mse += r.mean.denoising_error <= d.mean.denoising_error;
    if (r.n == 1000) {
      ++large;
      faster += r.mean.runtime_seconds < d.mean.runtime_seconds;
    }
    detail += "\n      " + r.scenario + " n=" + std::to_string(r.n) + ": miscls " +
              fmt("%.4f", r.mean.misclassification_rate) + " vs " + fmt("%.4f", d.mean.misclassification_rate) +
              ", mse " + fmt("%.3f", r.mean.denoising_error) + " vs " + fmt("%.3f", d.mean.denoising_error) +
              ", time " + fmt("%.4f", r.mean.runtime_seconds) + " vs " + fmt("%.4f", d.mean.runtime_seconds) +
              " s (RHLP vs DP)";
  }
  const bool a = close == cells;
  const bool b = 3 * lower_mse >= 2 * cells;
  const bool c = large > 0 && faster == large;
  return {a && b && c && failures == 0,
          "(a) " + std::to_string(close) + "/" + std::to_string(cells) + " cells within 2 pp; (b) " +
              std::to_string(lower_mse) + "/" + std::to_string(cells) + " cells with RHLP mse <= DP; (c) " +
              std::to_string(faster) + "/" + std::to_string(large) + " n=1000 cells RHLP faster; " +
              std::to_string(failures) + " failed fits" + detail};
}

// 6. reductions to simpler models
Outcome reductions() {
  double worst_beta = 0.0, worst_mstep = 0.0, worst_j = 0.0;
  bool same_partition = true;
  oracle::Gen gen(kMasterSeed + 6);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 200;
    const auto t = gen.times(n);
    auto x = gen.values(n, 2.0);
    for (std::size_t i = 0; i < n; ++i) x[i] += 3.0 - 0.2 * t[i] + 0.01 * t[i] * t[i];
    const Signal s(t, x);

    const FitReport one = em_fit(s, 1, 2, 1);
    const Eigen::VectorXd ols = least_squares(design_matrix(s, 2), s.x());
    worst_beta = std::max(worst_beta, (one.params.components[0].beta - ols).cwiseAbs().maxCoeff() /
                                          std::max(1.0, ols.cwiseAbs().maxCoeff()));

    const PiecewiseFit dp = fisher_dp(s, 3, 1);
    Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 3);
    const auto labels = dp.partition.labels();
    for (std::size_t i = 0; i < n; ++i) tau(static_cast<Eigen::Index>(i), labels[i] - 1) = 1.0;
    const auto comps = m_step_regression(tau, s, 1);
    for (int k = 0; k < 3; ++k) {
      const auto& want = dp.components[static_cast<std::size_t>(k)];
      const auto& got = comps[static_cast<std::size_t>(k)];
      worst_mstep = std::max(worst_mstep, (got.beta - want.beta).cwiseAbs().maxCoeff() /
                                              std::max(1.0, want.beta.cwiseAbs().maxCoeff()));
      worst_mstep = std::max(worst_mstep, std::fabs(got.sigma2 - want.sigma2) / std::max(1.0, want.sigma2));
    }

    const PiecewiseFit it = iterative_fisher(s, 3, 1, dp.partition);
    same_partition &= it.partition == dp.partition;
    worst_j = std::max(worst_j, std::fabs(it.criterion_j - dp.criterion_j));
  }
  const bool pass = worst_beta <= 1e-9 && worst_mstep <= 1e-9 && worst_j <= 1e-9 && same_partition;
  return {pass, "K=1 beta vs OLS " + fmt("%.2e", worst_beta) + "; binary-tau M-step vs segment OLS " +
                    fmt("%.2e", worst_mstep) + "; iterative from DP optimum |dJ| " + fmt("%.2e", worst_j) +
                    (same_partition ? ", partition unchanged" : ", partition CHANGED")};
}

// 7. free-parameter count
Outcome parameter_count() {
  int ok = 0, total = 0;
  for (int K = 1; K <= 4; ++K) {
    for (int p = 0; p <= 3; ++p) {
      for (int q = 0; q <= 2; ++q) {
        RhlpParams params;
        params.degree = p;
        params.logistic = LogisticProcess::zeros(K, q);
        params.components.assign(static_cast<std::size_t>(K), {Eigen::VectorXd::Zero(p + 1), 1.0});
        long counted = params.logistic.free_parameters().size();
        for (const auto& c : params.components) counted += c.beta.size() + 1;
        const int formula = K * (p + q + 3) - (q + 1);
        ++total;
        ok += counted == formula && free_parameter_count(K, p, q) == formula;
      }
    }
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " (K,p,q) combinations exact"};
}

// 8. BIC picks three components on situation 1
Outcome model_selection() {
  int hits = 0;
  std::vector<int> chosen;
  for (int r = 0; r < 20; ++r) {
    const SimulatedSignal sim = simulate_piecewise(situation1(), 1000, cell_seed(kMasterSeed + 8, "situation1", 1000, r));
    const ModelSelection sel = select_model(sim.signal, {1, 2, 3, 4, 5}, {2}, 1);
    const int k = sel.best ? sel.best->params.K() : 0;
    chosen.push_back(k);
    hits += k == 3;
  }
  std::string picks;
  for (int k : chosen) picks += std::to_string(k);
  return {hits >= 15, std::to_string(hits) + "/20 replicates select K=3 from K in 1..5 (picks " + picks + ")"};
}

// 9. benchmark output is reproducible
Outcome benchmark_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "segreg_acceptance";
  fs::create_directories(dir);
  auto run_once = [&](const std::string& name) {
    const std::string path = (dir / name).string();
    std::ostringstream out, err;
    const int code = cli::run({"benchmark", "--scenarios", "situation1,situation2", "--n", "100,500,1000",
                               "--replicates", "20", "--seed", "42", "--no-timing", "--output", path},
                              out, err);
    std::ifstream in(path, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    return std::make_pair(code, text.str());
  };
  const auto a = run_once("first.csv");
  const auto b = run_once("second.csv");
  fs::remove_all(dir);
  const bool pass = a.first == 0 && b.first == 0 && !a.second.empty() && a.second == b.second;
  return {pass, "two runs with seed 42: exit " + std::to_string(a.first) + "/" + std::to_string(b.first) + ", " +
                    std::to_string(a.second.size()) + " bytes, " + (a.second == b.second ? "identical" : "DIFFERENT")};
}

}  // namespace

// With arguments, only the listed criterion numbers run.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "DP global optimality", 30, dp_optimality},
      {2, "EM ascent", 60, em_ascent},
      {3, "IRLS correctness", 30, irls_correctness},
      {4, "transition recovery", 1e9, transition_recovery},
      {5, "criterion orderings", 1200, criterion_orderings},
      {6, "reductions", 1e9, reductions},
      {7, "free-parameter count", 1e9, parameter_count},
      {8, "model selection", 1e9, model_selection},
      {9, "benchmark determinism", 1e9, benchmark_determinism},
  };
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && only.count(c.id) == 0) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double elapsed = seconds_since(start);
    std::string budget;
    if (c.budget_s < 1e8) {
      budget = ", budget " + fmt("%.0f", c.budget_s) + " s";
      if (elapsed > c.budget_s) {
        o.pass = false;
        budget += " EXCEEDED";
      }
    }
    failed += !o.pass;
    std::printf("criterion %d [%s] %s: %s (%.1f s%s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                elapsed, budget.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
