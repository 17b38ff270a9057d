#include "segreg/report_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace segreg {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_number(std::string_view field) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

[[noreturn]] void schema_error(const std::string& message) {
  throw Error(ErrorKind::SchemaError, message);
}

template <class T>
std::optional<T> optional_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <class T>
T required_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) schema_error(std::string("missing field \"") + key + "\"");
  return it->get<T>();
}

template <class T>
json nullable(const std::optional<T>& value) {
  return value ? json(*value) : json(nullptr);
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_shapes(const StoredReport& r) {
  if (r.model != "rhlp" && r.model != "piecewise_dp" && r.model != "piecewise_iterative") {
    schema_error("unknown model tag \"" + r.model + "\"");
  }
  if (r.K < 1 || r.p < 0) schema_error("K must be >= 1 and p >= 0");
  const auto K = static_cast<std::size_t>(r.K);
  if (r.beta.size() != K) schema_error("\"beta\" must have K rows");
  for (const auto& row : r.beta) {
    if (row.size() != static_cast<std::size_t>(r.p) + 1) schema_error("\"beta\" rows must have p+1 entries");
  }
  if (r.sigma2.size() != K) schema_error("\"sigma2\" must have K entries");
  if (r.model == "rhlp") {
    if (!r.q || *r.q < 0) schema_error("rhlp report needs q >= 0");
    if (!r.w || r.w->size() != K) schema_error("\"w\" must have K rows");
    for (const auto& row : *r.w) {
      if (row.size() != static_cast<std::size_t>(*r.q) + 1) schema_error("\"w\" rows must have q+1 entries");
    }
  } else {
    if (!r.gamma || r.gamma->size() != K + 1) schema_error("\"gamma\" must have K+1 entries");
  }
  if (!r.labels.empty() && !r.denoised.empty() && r.labels.size() != r.denoised.size()) {
    schema_error("\"labels\" and \"denoised\" differ in length");
  }
}

}  // namespace

Signal parse_signal_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<double> t;
  std::vector<double> x;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (!header_seen) {
      const auto fields = split_fields(view);
      if (fields.size() < 2 || fields[0] != "t" || fields[1] != "x") {
        throw Error(ErrorKind::ParseError, "line 1: expected header \"t,x\"", 1);
      }
      header_seen = true;
      continue;
    }
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (fields.size() < 2) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected two columns",
                  line_no);
    }
    const auto tv = parse_number(fields[0]);
    const auto xv = parse_number(fields[1]);
    if (!tv || !xv) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": invalid number",
                  line_no);
    }
    const std::size_t index = t.size();
    if (!std::isfinite(*tv) || !std::isfinite(*xv)) {
      throw Error(ErrorKind::NonFiniteValue,
                  "line " + std::to_string(line_no) + ": non-finite sample at index " +
                      std::to_string(index),
                  index);
    }
    if (!t.empty() && !(*tv > t.back())) {
      throw Error(ErrorKind::NonMonotonicTime,
                  "line " + std::to_string(line_no) + ": time not strictly increasing at index " +
                      std::to_string(index),
                  index);
    }
    t.push_back(*tv);
    x.push_back(*xv);
  }
  if (!header_seen) throw Error(ErrorKind::ParseError, "line 1: expected header \"t,x\"", 1);
  if (t.empty()) throw Error(ErrorKind::ParseError, "no samples after the header", line_no + 1);
  return Signal(t, x);
}

Signal load_signal_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  return parse_signal_csv(in);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_signal_csv(std::ostream& out, const Signal& signal, const std::vector<int>* labels) {
  if (labels && labels->size() != signal.size()) {
    throw Error(ErrorKind::LengthMismatch, "labels do not match the signal length");
  }
  out << (labels ? "t,x,label\n" : "t,x\n");
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out << format_double(signal.t()[idx]) << ',' << format_double(signal.x()[idx]);
    if (labels) out << ',' << (*labels)[i];
    out << '\n';
  }
}

StoredReport to_stored(const FitReport& report) {
  StoredReport r;
  const RhlpParams& params = report.params;
  r.model = "rhlp";
  r.K = params.K();
  r.p = params.degree;
  r.q = params.q();
  std::vector<std::vector<double>> w;
  for (int k = 0; k < params.K(); ++k) w.push_back(to_std(params.logistic.w.col(k)));
  r.w = std::move(w);
  for (const GaussianComponent& c : params.components) {
    r.beta.push_back(to_std(c.beta));
    r.sigma2.push_back(c.sigma2);
  }
  r.log_likelihood = report.log_likelihood;
  r.bic = report.bic;
  r.labels = report.labels;
  r.denoised = to_std(report.denoised);
  r.runtime_seconds = report.runtime_seconds;
  r.converged = report.converged;
  r.seed = report.seed;
  r.log_likelihood_trace = report.log_likelihood_trace;
  r.iterations = report.em_iterations;
  r.warnings = report.warnings;
  return r;
}

StoredReport to_stored(const PiecewiseFit& fit, const std::string& model, const Eigen::VectorXd& t,
                       std::optional<std::uint64_t> seed) {
  StoredReport r;
  r.model = model;
  r.K = fit.segments();
  r.p = fit.degree;
  for (const GaussianComponent& c : fit.components) {
    r.beta.push_back(to_std(c.beta));
    r.sigma2.push_back(c.sigma2);
  }
  r.gamma = fit.partition.gamma;
  r.log_likelihood = fit.log_likelihood;
  r.criterion_j = fit.criterion_j;
  r.labels = fit.partition.labels();
  r.denoised = to_std(piecewise_expectation(fit, t));
  r.runtime_seconds = fit.runtime_seconds;
  r.converged = fit.converged;
  r.seed = seed;
  r.iterations = fit.iterations;
  check_shapes(r);
  return r;
}

RhlpParams rhlp_params(const StoredReport& report) {
  check_shapes(report);
  if (report.model != "rhlp") schema_error("report model is \"" + report.model + "\", not rhlp");
  RhlpParams params;
  params.degree = report.p;
  params.logistic = LogisticProcess::zeros(report.K, *report.q);
  for (int k = 0; k < report.K; ++k) {
    params.logistic.w.col(k) = to_eigen((*report.w)[static_cast<std::size_t>(k)]);
    params.components.push_back(
        {to_eigen(report.beta[static_cast<std::size_t>(k)]), report.sigma2[static_cast<std::size_t>(k)]});
  }
  return params;
}

PiecewiseFit piecewise_fit(const StoredReport& report) {
  check_shapes(report);
  if (report.model == "rhlp") schema_error("report model is rhlp, not a piecewise fit");
  PiecewiseFit fit;
  fit.degree = report.p;
  fit.partition.gamma = *report.gamma;
  for (int k = 0; k < report.K; ++k) {
    fit.components.push_back(
        {to_eigen(report.beta[static_cast<std::size_t>(k)]), report.sigma2[static_cast<std::size_t>(k)]});
  }
  fit.criterion_j = report.criterion_j.value_or(std::nan(""));
  fit.log_likelihood = report.log_likelihood.value_or(std::nan(""));
  fit.converged = report.converged.value_or(true);
  fit.iterations = report.iterations.value_or(0);
  fit.runtime_seconds = report.runtime_seconds.value_or(0.0);
  return fit;
}

std::string dump_report(const StoredReport& r) {
  check_shapes(r);
  json j;
  j["model"] = r.model;
  j["K"] = r.K;
  j["p"] = r.p;
  j["q"] = nullable(r.q);
  j["w"] = nullable(r.w);
  j["beta"] = r.beta;
  j["sigma2"] = r.sigma2;
  j["gamma"] = nullable(r.gamma);
  j["log_likelihood"] = nullable(r.log_likelihood);
  j["bic"] = nullable(r.bic);
  j["criterion_j"] = nullable(r.criterion_j);
  j["labels"] = r.labels;
  j["denoised"] = r.denoised;
  j["runtime_seconds"] = nullable(r.runtime_seconds);
  j["converged"] = nullable(r.converged);
  j["seed"] = nullable(r.seed);
  j["log_likelihood_trace"] = r.log_likelihood_trace;
  j["iterations"] = nullable(r.iterations);
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

StoredReport parse_report(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    schema_error(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) schema_error("report must be a JSON object");
  StoredReport r;
  try {
    r.model = required_field<std::string>(j, "model");
    r.K = required_field<int>(j, "K");
    r.p = required_field<int>(j, "p");
    r.q = optional_field<int>(j, "q");
    r.w = optional_field<std::vector<std::vector<double>>>(j, "w");
    r.beta = required_field<std::vector<std::vector<double>>>(j, "beta");
    r.sigma2 = required_field<std::vector<double>>(j, "sigma2");
    r.gamma = optional_field<std::vector<std::size_t>>(j, "gamma");
    r.log_likelihood = optional_field<double>(j, "log_likelihood");
    r.bic = optional_field<double>(j, "bic");
    r.criterion_j = optional_field<double>(j, "criterion_j");
    r.labels = optional_field<std::vector<int>>(j, "labels").value_or(std::vector<int>{});
    r.denoised = optional_field<std::vector<double>>(j, "denoised").value_or(std::vector<double>{});
    r.runtime_seconds = optional_field<double>(j, "runtime_seconds");
    r.converged = optional_field<bool>(j, "converged");
    r.seed = optional_field<std::uint64_t>(j, "seed");
    r.log_likelihood_trace =
        optional_field<std::vector<double>>(j, "log_likelihood_trace").value_or(std::vector<double>{});
    r.iterations = optional_field<int>(j, "iterations");
    r.warnings = optional_field<std::vector<std::string>>(j, "warnings").value_or(std::vector<std::string>{});
  } catch (const json::exception& e) {
    schema_error(std::string("malformed report: ") + e.what());
  }
  check_shapes(r);
  return r;
}

void save_fit_report(const StoredReport& report, const std::string& path) {
  const std::string text = dump_report(report);
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path);
}

StoredReport load_fit_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_report(buffer.str());
}

}  // namespace segreg
