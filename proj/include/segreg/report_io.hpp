#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "segreg/piecewise.hpp"
#include "segreg/regression.hpp"
#include "segreg/rhlp.hpp"

namespace segreg {

// CSV with a `t,x` header; further columns are ignored. Line numbers in errors are 1-based.
Signal parse_signal_csv(std::istream& in);
Signal load_signal_csv(const std::string& path);

// Writes `t,x[,label]` rows with shortest round-trip number formatting.
void write_signal_csv(std::ostream& out, const Signal& signal,
                      const std::vector<int>* labels = nullptr);

// Shortest decimal string that parses back to the same double ("nan"/"inf" spelled out).
std::string format_double(double value);

// Flat, model-agnostic view of a fit as persisted on disk. Fields a model does not
// produce are left empty and serialized as null.
struct StoredReport {
  std::string model;  // "rhlp" | "piecewise_dp" | "piecewise_iterative"
  int K = 0;
  int p = 0;
  std::optional<int> q;
  std::optional<std::vector<std::vector<double>>> w;  // K rows of q+1
  std::vector<std::vector<double>> beta;              // K rows of p+1
  std::vector<double> sigma2;
  std::optional<std::vector<std::size_t>> gamma;
  std::optional<double> log_likelihood;
  std::optional<double> bic;
  std::optional<double> criterion_j;
  std::vector<int> labels;
  std::vector<double> denoised;
  std::optional<double> runtime_seconds;
  std::optional<bool> converged;
  std::optional<std::uint64_t> seed;
  std::vector<double> log_likelihood_trace;
  std::optional<int> iterations;
  std::vector<std::string> warnings;

  bool operator==(const StoredReport&) const = default;
};

StoredReport to_stored(const FitReport& report);
StoredReport to_stored(const PiecewiseFit& fit, const std::string& model, const Eigen::VectorXd& t,
                       std::optional<std::uint64_t> seed = std::nullopt);

// Throws SchemaError unless the report is an RHLP model with consistent shapes.
RhlpParams rhlp_params(const StoredReport& report);
PiecewiseFit piecewise_fit(const StoredReport& report);

std::string dump_report(const StoredReport& report);
StoredReport parse_report(const std::string& text);

void save_fit_report(const StoredReport& report, const std::string& path);
StoredReport load_fit_report(const std::string& path);

}  // namespace segreg
