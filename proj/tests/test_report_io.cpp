#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "segreg/report_io.hpp"
#include "segreg/simulation.hpp"
#include "support.hpp"

using namespace segreg;

namespace {

ErrorKind parse_kind(const std::string& text, std::optional<std::size_t>* where = nullptr) {
  std::istringstream in(text);
  try {
    parse_signal_csv(in);
  } catch (const Error& e) {
    if (where) *where = e.location();
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::IoError;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("segreg_test_" + name);
}

}  // namespace

TEST_CASE("signal CSV parsing") {
  std::istringstream in("t,x\n0,1\n1,2");
  const Signal s = parse_signal_csv(in);
  CHECK(s.t() == Eigen::Vector2d(0, 1));
  CHECK(s.x() == Eigen::Vector2d(1, 2));

  std::istringstream extra("t,x,label\r\n0,1.5,1\r\n0.25,-2e3,2\r\n\n");
  const Signal e = parse_signal_csv(extra);
  CHECK(e.size() == 2);
  CHECK(e.x()[1] == -2000.0);

  std::optional<std::size_t> where;
  CHECK(parse_kind("0,1\n1,2\n", &where) == ErrorKind::ParseError);
  CHECK(where == std::optional<std::size_t>(1));
  CHECK(parse_kind("", &where) == ErrorKind::ParseError);
  CHECK(parse_kind("t,x\n0,1\n1,abc\n", &where) == ErrorKind::ParseError);
  CHECK(where == std::optional<std::size_t>(3));
  CHECK(parse_kind("t,x\n0,1\n2,2\n1,3\n", &where) == ErrorKind::NonMonotonicTime);
  CHECK(where == std::optional<std::size_t>(2));
  CHECK(parse_kind("t,x\n0,1\n1,nan\n") == ErrorKind::NonFiniteValue);
  CHECK(parse_kind("t,x\n") == ErrorKind::ParseError);

  try {
    load_signal_csv("/nonexistent/dir/signal.csv");
    FAIL("expected IoError");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::IoError);
  }
}

TEST_CASE("signal CSV round trip keeps every bit") {
  const SimulatedSignal sim = simulate_piecewise(situation2(), 137, 4);
  std::ostringstream out;
  write_signal_csv(out, sim.signal, &sim.labels);
  CHECK(out.str().rfind("t,x,label\n", 0) == 0);
  std::istringstream in(out.str());
  const Signal back = parse_signal_csv(in);
  CHECK(back.t() == sim.signal.t());
  CHECK(back.x() == sim.signal.x());
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-0.0) == "-0");
  CHECK(format_double(NAN) == "nan");
}

TEST_CASE("RHLP report round trip") {
  const SimulatedSignal sim = simulate_piecewise(situation1(), 200, 2);
  const FitReport fit = em_fit(sim.signal, 3, 2, 1);
  const StoredReport stored = to_stored(fit);
  CHECK(stored.model == "rhlp");
  CHECK(stored.beta.size() == 3);
  CHECK(stored.beta[0].size() == 3);
  REQUIRE(stored.w.has_value());
  CHECK(stored.w->size() == 3);
  CHECK(stored.w->back() == std::vector<double>{0.0, 0.0});

  const StoredReport back = parse_report(dump_report(stored));
  CHECK(back == stored);

  const RhlpParams params = rhlp_params(back);
  CHECK(mixture_log_likelihood(params, sim.signal) == mixture_log_likelihood(fit.params, sim.signal));

  const auto path = temp_path("rhlp.json");
  save_fit_report(stored, path.string());
  CHECK(load_fit_report(path.string()) == stored);
  std::filesystem::remove(path);

  const auto j = nlohmann::json::parse(dump_report(stored));
  for (const char* key : {"model", "K", "p", "q", "w", "beta", "sigma2", "gamma", "log_likelihood", "bic",
                          "criterion_j", "labels", "denoised", "runtime_seconds", "converged", "seed"}) {
    CHECK_MESSAGE(j.contains(key), key);
  }
  CHECK(j["gamma"].is_null());
  CHECK(j["criterion_j"].is_null());
}

TEST_CASE("piecewise report round trip") {
  const SimulatedSignal sim = simulate_piecewise(situation2(), 150, 6);
  const PiecewiseFit fit = fisher_dp(sim.signal, 2, 1);
  const StoredReport stored = to_stored(fit, "piecewise_dp", sim.signal.t());
  CHECK(stored.beta.size() == 2);
  CHECK(stored.beta[1].size() == 2);
  CHECK_FALSE(stored.w.has_value());
  CHECK(parse_report(dump_report(stored)) == stored);
  const PiecewiseFit back = piecewise_fit(parse_report(dump_report(stored)));
  CHECK(back.partition == fit.partition);
  CHECK(back.criterion_j == fit.criterion_j);
  CHECK(piecewise_expectation(back, sim.signal.t()) == piecewise_expectation(fit, sim.signal.t()));

  const PiecewiseFit it = multi_start_iterative(sim.signal, 2, 1, 3, 17);
  const StoredReport si = to_stored(it, "piecewise_iterative", sim.signal.t(), 17);
  CHECK(parse_report(dump_report(si)) == si);
  CHECK(si.seed == std::optional<std::uint64_t>(17));
}

TEST_CASE("report schema errors") {
  const SimulatedSignal sim = simulate_piecewise(situation2(), 100, 6);
  const StoredReport good = to_stored(fisher_dp(sim.signal, 2, 1), "piecewise_dp", sim.signal.t());
  auto kind_of = [](const std::string& text) {
    try {
      parse_report(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  auto j = nlohmann::json::parse(dump_report(good));
  j["model"] = "hmm";
  CHECK(kind_of(j.dump()) == ErrorKind::SchemaError);
  j = nlohmann::json::parse(dump_report(good));
  j["beta"].erase(0);
  CHECK(kind_of(j.dump()) == ErrorKind::SchemaError);
  j = nlohmann::json::parse(dump_report(good));
  j["beta"][0].push_back(1.0);
  CHECK(kind_of(j.dump()) == ErrorKind::SchemaError);
  j = nlohmann::json::parse(dump_report(good));
  j["K"] = "two";
  CHECK(kind_of(j.dump()) == ErrorKind::SchemaError);
  CHECK(kind_of("{not json") == ErrorKind::SchemaError);
  CHECK_THROWS_AS(rhlp_params(good), Error);
  try {
    load_fit_report("/nonexistent/report.json");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IoError);
  }
}
