#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "segreg/piecewise.hpp"
#include "segreg/report_io.hpp"
#include "segreg/rhlp.hpp"
#include "segreg/simulation.hpp"

namespace py = pybind11;
using namespace segreg;

namespace {

Signal make_signal(const Eigen::VectorXd& t, const Eigen::VectorXd& x) { return Signal(t, x); }

SegmentationOptions seg_options(std::optional<int> min_segment_length, double variance_floor) {
  SegmentationOptions o;
  o.min_segment_length = min_segment_length;
  o.variance_floor = variance_floor;
  return o;
}

EmOptions em_options(double epsilon, double delta, int max_iter, double variance_floor,
                     const std::string& init, int restarts, std::uint64_t seed) {
  EmOptions o;
  o.epsilon = epsilon;
  o.irls.delta = delta;
  o.max_iter = max_iter;
  o.variance_floor = variance_floor;
  if (init == "uniform") o.init = InitStrategy::Uniform;
  else if (init == "randomized") o.init = InitStrategy::Randomized;
  else throw Error(ErrorKind::InvalidArgument, "init must be 'uniform' or 'randomized'");
  o.restarts = restarts;
  o.seed = seed;
  return o;
}

PiecewiseScenario scenario(const std::string& name) {
  auto s = scenario_by_name(name);
  if (!s) throw Error(ErrorKind::InvalidArgument, "unknown scenario '" + name + "'");
  return *s;
}

}  // namespace

PYBIND11_MODULE(_segreg, m) {
  m.doc() = "Time-series segmentation: hidden logistic process regression and piecewise regression";

  // Leaked on purpose: the type must outlive every translator call.
  static PyObject* error_type = py::exception<Error>(m, "SegregError", PyExc_ValueError).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error_type)(std::string(e.what()));
      instance.attr("kind") = std::string(to_string(e.kind()));
      instance.attr("location") = e.location() ? py::cast(*e.location()) : py::none();
      PyErr_SetObject(error_type, instance.ptr());
    }
  });

  py::class_<GaussianComponent>(m, "GaussianComponent")
      .def(py::init<>())
      .def(py::init([](Eigen::VectorXd beta, double sigma2) { return GaussianComponent{std::move(beta), sigma2}; }),
           py::arg("beta"), py::arg("sigma2"))
      .def_readwrite("beta", &GaussianComponent::beta)
      .def_readwrite("sigma2", &GaussianComponent::sigma2)
      .def("mean_at", &GaussianComponent::mean_at);

  py::class_<LogisticProcess>(m, "LogisticProcess")
      .def(py::init([](Eigen::MatrixXd w) { return LogisticProcess{std::move(w)}; }), py::arg("w"))
      .def_static("zeros", &LogisticProcess::zeros, py::arg("K"), py::arg("q"))
      .def_readwrite("w", &LogisticProcess::w)
      .def("free_parameters", &LogisticProcess::free_parameters)
      .def("set_free_parameters", &LogisticProcess::set_free_parameters);

  py::class_<RhlpParams>(m, "RhlpParams")
      .def(py::init([](LogisticProcess logistic, std::vector<GaussianComponent> components, int p) {
             RhlpParams r{std::move(logistic), std::move(components), p};
             check_params(r);
             return r;
           }),
           py::arg("logistic"), py::arg("components"), py::arg("p"))
      .def_readwrite("logistic", &RhlpParams::logistic)
      .def_readwrite("components", &RhlpParams::components)
      .def_readwrite("degree", &RhlpParams::degree)
      .def_property_readonly("K", &RhlpParams::K)
      .def_property_readonly("q", &RhlpParams::q);

  py::class_<FitReport>(m, "FitReport")
      .def_readonly("params", &FitReport::params)
      .def_readonly("log_likelihood_trace", &FitReport::log_likelihood_trace)
      .def_readonly("log_likelihood", &FitReport::log_likelihood)
      .def_readonly("bic", &FitReport::bic)
      .def_readonly("labels", &FitReport::labels)
      .def_readonly("denoised", &FitReport::denoised)
      .def_readonly("runtime_seconds", &FitReport::runtime_seconds)
      .def_readonly("converged", &FitReport::converged)
      .def_readonly("em_iterations", &FitReport::em_iterations)
      .def_readonly("warnings", &FitReport::warnings)
      .def("to_json", [](const FitReport& r) { return dump_report(to_stored(r)); });

  py::class_<PiecewiseFit>(m, "PiecewiseFit")
      .def_property_readonly("gamma", [](const PiecewiseFit& f) { return f.partition.gamma; })
      .def_property_readonly("labels", [](const PiecewiseFit& f) { return f.partition.labels(); })
      .def_readonly("components", &PiecewiseFit::components)
      .def_readonly("degree", &PiecewiseFit::degree)
      .def_readonly("criterion_j", &PiecewiseFit::criterion_j)
      .def_readonly("log_likelihood", &PiecewiseFit::log_likelihood)
      .def_readonly("iterations", &PiecewiseFit::iterations)
      .def_readonly("criterion_trace", &PiecewiseFit::criterion_trace)
      .def_readonly("start_criteria", &PiecewiseFit::start_criteria)
      .def_readonly("runtime_seconds", &PiecewiseFit::runtime_seconds)
      .def("expectation", [](const PiecewiseFit& f, const Eigen::VectorXd& t) { return piecewise_expectation(f, t); });

  m.def("polynomial_basis", &polynomial_basis, py::arg("t"), py::arg("p"));
  m.def("design_matrix", py::overload_cast<const Eigen::VectorXd&, int>(&design_matrix), py::arg("t"), py::arg("p"));
  m.def("weighted_least_squares", &weighted_least_squares, py::arg("design"), py::arg("x"), py::arg("weights"));
  m.def("gaussian_log_density", &gaussian_log_density, py::arg("x"), py::arg("mean"), py::arg("sigma2"));

  m.def(
      "fit_rhlp",
      [](const Eigen::VectorXd& t, const Eigen::VectorXd& x, int K, int p, int q, double epsilon, double delta,
         int max_iter, double variance_floor, const std::string& init, int restarts, std::uint64_t seed) {
        const Signal s = make_signal(t, x);
        const EmOptions o = em_options(epsilon, delta, max_iter, variance_floor, init, restarts, seed);
        py::gil_scoped_release release;
        return em_fit(s, K, p, q, o);
      },
      py::arg("t"), py::arg("x"), py::arg("K") = 3, py::arg("p") = 2, py::arg("q") = 1, py::arg("epsilon") = 1e-6,
      py::arg("delta") = 1e-6, py::arg("max_iter") = 1000, py::arg("variance_floor") = kDefaultVarianceFloor,
      py::arg("init") = "uniform", py::arg("restarts") = 10, py::arg("seed") = 0,
      "Fit the hidden logistic process regression model by EM.");

  m.def(
      "fisher_dp",
      [](const Eigen::VectorXd& t, const Eigen::VectorXd& x, int K, int p, std::optional<int> min_segment_length,
         double variance_floor) {
        const Signal s = make_signal(t, x);
        py::gil_scoped_release release;
        return fisher_dp(s, K, p, seg_options(min_segment_length, variance_floor));
      },
      py::arg("t"), py::arg("x"), py::arg("K") = 3, py::arg("p") = 2, py::arg("min_segment_length") = py::none(),
      py::arg("variance_floor") = kDefaultVarianceFloor, "Globally optimal piecewise polynomial fit.");

  m.def(
      "iterative_fisher",
      [](const Eigen::VectorXd& t, const Eigen::VectorXd& x, int K, int p, std::vector<std::size_t> init_gamma,
         int max_iter, double tol, std::optional<int> min_segment_length) {
        const Signal s = make_signal(t, x);
        IterativeOptions it{max_iter, tol};
        py::gil_scoped_release release;
        return iterative_fisher(s, K, p, Partition{std::move(init_gamma)}, it,
                                seg_options(min_segment_length, kDefaultVarianceFloor));
      },
      py::arg("t"), py::arg("x"), py::arg("K"), py::arg("p"), py::arg("init_gamma"), py::arg("max_iter") = 100,
      py::arg("tol") = 1e-6, py::arg("min_segment_length") = py::none());

  m.def(
      "multi_start_iterative",
      [](const Eigen::VectorXd& t, const Eigen::VectorXd& x, int K, int p, int n_random_starts, std::uint64_t seed,
         std::optional<int> min_segment_length) {
        const Signal s = make_signal(t, x);
        py::gil_scoped_release release;
        return multi_start_iterative(s, K, p, n_random_starts, seed, {},
                                     seg_options(min_segment_length, kDefaultVarianceFloor));
      },
      py::arg("t"), py::arg("x"), py::arg("K") = 3, py::arg("p") = 2, py::arg("n_random_starts") = 10,
      py::arg("seed") = 0, py::arg("min_segment_length") = py::none());

  m.def("logistic_proportions", &logistic_proportions, py::arg("logistic"), py::arg("t"));
  m.def(
      "mixture_log_likelihood",
      [](const RhlpParams& params, const Eigen::VectorXd& t, const Eigen::VectorXd& x) {
        return mixture_log_likelihood(params, make_signal(t, x));
      },
      py::arg("params"), py::arg("t"), py::arg("x"));
  m.def(
      "e_step",
      [](const RhlpParams& params, const Eigen::VectorXd& t, const Eigen::VectorXd& x) {
        return e_step(params, make_signal(t, x));
      },
      py::arg("params"), py::arg("t"), py::arg("x"));
  m.def("denoise", &denoise, py::arg("params"), py::arg("t"));
  m.def("hard_labels", &hard_labels, py::arg("params"), py::arg("t"));
  m.def("free_parameter_count", &free_parameter_count, py::arg("K"), py::arg("p"), py::arg("q"));
  m.def("bic", py::overload_cast<double, int, int, int, std::size_t>(&bic), py::arg("log_likelihood"), py::arg("K"),
        py::arg("p"), py::arg("q"), py::arg("n"));

  m.def(
      "select_model",
      [](const Eigen::VectorXd& t, const Eigen::VectorXd& x, std::vector<int> K_range, std::vector<int> p_range,
         int q) {
        const Signal s = make_signal(t, x);
        ModelSelection sel;
        {
          py::gil_scoped_release release;
          sel = select_model(s, K_range, p_range, q);
        }
        py::list table;
        for (const ModelScore& sc : sel.table) {
          py::dict row;
          row["K"] = sc.K;
          row["p"] = sc.p;
          row["q"] = sc.q;
          row["ok"] = sc.ok;
          row["log_likelihood"] = sc.log_likelihood;
          row["bic"] = sc.bic;
          row["parameters"] = sc.parameters;
          row["error"] = sc.error;
          table.append(row);
        }
        return py::make_tuple(sel.best ? py::cast(*sel.best) : py::none(), table);
      },
      py::arg("t"), py::arg("x"), py::arg("K_range"), py::arg("p_range"), py::arg("q") = 1,
      "BIC sweep; returns (best FitReport or None, list of score rows).");

  m.def(
      "simulate_piecewise",
      [](const std::string& name, std::size_t n, std::uint64_t seed) {
        const SimulatedSignal s = simulate_piecewise(scenario(name), n, seed);
        return py::make_tuple(s.signal.t(), s.signal.x(), s.labels);
      },
      py::arg("scenario"), py::arg("n"), py::arg("seed"), "Returns (t, x, labels) for situation1 or situation2.");
  m.def(
      "simulate_rhlp",
      [](const RhlpParams& params, const Eigen::VectorXd& t, std::uint64_t seed) {
        const SimulatedSignal s = simulate_rhlp(params, t, seed);
        return py::make_tuple(s.signal.t(), s.signal.x(), s.labels);
      },
      py::arg("params"), py::arg("t"), py::arg("seed"));
  m.def(
      "scenario_expectation", [](const std::string& name, std::size_t n) { return scenario_expectation(scenario(name), n); },
      py::arg("scenario"), py::arg("n"));
  m.def("misclassification_rate", &misclassification_rate, py::arg("truth"), py::arg("estimate"));
  m.def("denoising_error", &denoising_error, py::arg("truth"), py::arg("estimate"));
  m.def("transition_times", &transition_times, py::arg("labels"), py::arg("t"));

  m.def(
      "run_benchmark",
      [](std::vector<std::string> scenarios, std::vector<std::size_t> n_grid, int replicates,
         std::vector<std::string> methods, std::uint64_t seed, bool record_timing) {
        BenchmarkConfig cfg;
        for (const auto& s : scenarios) cfg.scenarios.push_back(scenario(s));
        cfg.n_grid = std::move(n_grid);
        cfg.replicates = replicates;
        cfg.methods.clear();
        for (const auto& name : methods) {
          auto mm = method_by_name(name);
          if (!mm) throw Error(ErrorKind::InvalidArgument, "unknown method '" + name + "'");
          cfg.methods.push_back(*mm);
        }
        cfg.seed = seed;
        cfg.record_timing = record_timing;
        std::vector<BenchmarkRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_benchmark(cfg);
        }
        py::list out;
        for (const BenchmarkRow& r : rows) {
          py::dict row;
          row["scenario"] = r.scenario;
          row["n"] = r.n;
          row["method"] = std::string(method_name(r.method));
          row["misclassification"] = r.mean.misclassification_rate;
          row["denoising_mse"] = r.mean.denoising_error;
          row["runtime_s"] = r.mean.runtime_seconds;
          row["failures"] = r.failures;
          out.append(row);
        }
        return out;
      },
      py::arg("scenarios"), py::arg("n_grid"), py::arg("replicates") = 20,
      py::arg("methods") = std::vector<std::string>{"rhlp", "fisher_dp", "fisher_iter"}, py::arg("seed") = 0,
      py::arg("record_timing") = true);
}
