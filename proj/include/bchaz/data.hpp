#pragma once

// Dataset ingestion, time-axis partitioning and simulation from the model.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "stats.hpp"

namespace bchaz {

// ---------------------------------------------------------------------------
// CSV helpers: comma-separated, header required, '.' decimal point.

namespace csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(sep, start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Parses a finite double occupying the whole field.
inline std::optional<double> parse_double(std::string_view field) {
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Shortest "%.17g" rendering; reading it back reproduces the double exactly.
inline std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace csv

/// Column roles for read_dataset. Empty `covariates` means every column
/// other than time and status, in file order.
struct CsvSchema {
  std::string time_column = "time";
  std::string status_column = "status";
  std::vector<std::string> covariates;
};

inline SurvivalDataset read_dataset(std::istream& in, const CsvSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("empty input: header row required");
  std::vector<std::string> header;
  for (auto f : csv::split(line)) header.emplace_back(f);

  auto find_column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IngestionError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t time_col = find_column(schema.time_column);
  const std::size_t status_col = find_column(schema.status_column);
  std::vector<std::size_t> cov_cols;
  SurvivalDataset data;
  if (schema.covariates.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != time_col && c != status_col) {
        cov_cols.push_back(c);
        data.covariate_names.push_back(header[c]);
      }
  } else {
    for (const auto& name : schema.covariates) {
      cov_cols.push_back(find_column(name));
      data.covariate_names.push_back(name);
    }
  }
  if (cov_cols.empty()) throw IngestionError("at least one covariate column required");

  std::size_t row = 0;
  std::vector<double> z(cov_cols.size());
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++row;
    const auto fields = csv::split(line);
    if (fields.size() != header.size())
      throw IngestionError("expected " + std::to_string(header.size()) + " fields, found " +
                               std::to_string(fields.size()),
                           row);
    auto number = [&](std::size_t c) {
      if (fields[c].empty()) throw IngestionError("missing value in column '" + header[c] + "'", row);
      auto v = csv::parse_double(fields[c]);
      if (!v) throw IngestionError("non-numeric value '" + std::string(fields[c]) + "' in column '" + header[c] + "'", row);
      return *v;
    };
    const double t = number(time_col);
    if (t < 0.0) throw IngestionError("negative time", row);
    const double st = number(status_col);
    if (st != 0.0 && st != 1.0) throw IngestionError("status must be 0 or 1", row);
    for (std::size_t c = 0; c < cov_cols.size(); ++c) z[c] = number(cov_cols[c]);
    data.time.push_back(t);
    data.status.push_back(static_cast<int>(st));
    data.covariates.append_row(z);
  }
  if (data.size() == 0) throw IngestionError("no data rows");
  if (data.num_events() == 0) throw IngestionError("at least one event required");
  if (data.covariates.cols() == 0) data.covariates = Matrix(data.size(), cov_cols.size());
  return data;
}

inline SurvivalDataset read_dataset_file(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_dataset(in, schema);
}

inline void write_dataset(std::ostream& out, const SurvivalDataset& data) {
  out << "time,status";
  for (std::size_t c = 0; c < data.num_covariates(); ++c)
    out << ',' << (c < data.covariate_names.size() ? data.covariate_names[c] : "z" + std::to_string(c + 1));
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << csv::format(data.time[i]) << ',' << data.status[i];
    for (double z : data.covariates.row(i)) out << ',' << csv::format(z);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

/// Relative margin placing the last cut point just beyond the largest time.
inline constexpr double kPartitionEndMargin = 1e-6;

/// J intervals with roughly equal event counts. With d events sorted as
/// e_(1) <= ... <= e_(d), cut j sits at e_(ceil(j d / J)); tied cut points
/// are moved to the next distinct event time (kept low enough that every
/// later interval still receives one), so every interval holds an event.
/// The last cut is (1 + 1e-6) * max y.
inline TimePartition build_partition(const SurvivalDataset& data, std::size_t J) {
  if (J < 1) throw ConfigError("interval count must be at least 1");
  std::vector<double> events;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.status[i] == 1) events.push_back(data.time[i]);
  if (events.empty()) throw ConfigError("at least one event required to partition the time axis");
  std::sort(events.begin(), events.end());
  std::vector<double> distinct;
  for (double e : events)
    if (e > 0.0 && (distinct.empty() || e != distinct.back())) distinct.push_back(e);
  if (distinct.size() < J)
    throw ConfigError("requested " + std::to_string(J) + " intervals but only " + std::to_string(distinct.size()) +
                      " distinct positive event times; use a smaller J");

  const double d = static_cast<double>(events.size());
  TimePartition part;
  part.cuts.push_back(0.0);
  std::size_t prev = 0;  // number of distinct times already consumed
  for (std::size_t j = 1; j < J; ++j) {
    const auto rank = static_cast<std::size_t>(std::ceil(static_cast<double>(j) * d / static_cast<double>(J) - 1e-9));
    const double target = events[std::max<std::size_t>(rank, 1) - 1];
    // 1-based position of target among the distinct times
    std::size_t q = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), target) - distinct.begin()) + 1;
    q = std::max(q, prev + 1);
    q = std::min(q, distinct.size() - (J - j));
    part.cuts.push_back(distinct[q - 1]);
    prev = q;
  }
  part.cuts.push_back((1.0 + kPartitionEndMargin) * data.max_time());
  return part;
}

// ---------------------------------------------------------------------------
// Simulation with a constant baseline hazard.

struct NormalCovariate {
  double mean = 0.0;
  double sd = 1.0;
};

/// Takes `high` with probability `q`, otherwise `low`.
struct BinaryCovariate {
  double low = 0.0;
  double high = 1.0;
  double q = 0.5;
};

using CovariateGenerator = std::variant<NormalCovariate, BinaryCovariate>;

struct SimulationSpec {
  std::size_t n = 300;
  double gamma = 0.5;
  double lambda0 = 0.5;
  std::vector<double> beta{0.7, 1.0};
  std::vector<CovariateGenerator> covariates{NormalCovariate{5.0, 1.0}, BinaryCovariate{1.0, 2.0, 0.5}};
  /// Target censoring fraction for Uniform(0, c) censoring; nullopt = none.
  std::optional<double> censoring_rate = 0.25;
  std::uint64_t seed = 1;

  void validate() const {
    if (n < 1) throw ConfigError("simulation: n must be at least 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("simulation: gamma must lie in [0, 1]");
    if (!(lambda0 > 0.0)) throw ConfigError("simulation: lambda0 must be positive");
    if (beta.size() != covariates.size()) throw ConfigError("simulation: one coefficient per covariate generator");
    if (censoring_rate && !(*censoring_rate > 0.0 && *censoring_rate < 1.0))
      throw ConfigError("simulation: censoring rate must lie in (0, 1)");
    for (const auto& g : covariates) {
      if (const auto* nc = std::get_if<NormalCovariate>(&g); nc && !(nc->sd >= 0.0))
        throw ConfigError("simulation: normal covariate sd must be nonnegative");
      if (const auto* bc = std::get_if<BinaryCovariate>(&g); bc && !(bc->q >= 0.0 && bc->q <= 1.0))
        throw ConfigError("simulation: binary covariate probability must lie in [0, 1]");
    }
  }
};

struct SimulationResult {
  SurvivalDataset data;
  /// Calibrated upper bound c of the Uniform(0, c) censoring; +inf with no censoring.
  double censoring_bound = kPosInf;
  /// E[P(C < T)] over the drawn covariates at the calibrated bound.
  double expected_censoring_rate = 0.0;
  std::size_t redraws = 0;
};

/// P(C < T) averaged over subjects for C ~ U(0, c), T ~ Exp(h_i).
inline double expected_censoring(std::span<const double> rates, double c) {
  double acc = 0.0;
  for (double h : rates) {
    const double x = h * c;
    acc += x < 1e-12 ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
  }
  return acc / static_cast<double>(rates.size());
}

/// Bisection (on log c) for the censoring bound that gives `target`.
inline double calibrate_censoring_bound(std::span<const double> rates, double target) {
  double lo = 1e-12, hi = 1.0;
  while (expected_censoring(rates, hi) > target) hi *= 2.0;
  while (expected_censoring(rates, lo) < target) lo *= 0.5;
  for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-14; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (expected_censoring(rates, mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

inline SimulationResult simulate(const SimulationSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  const std::size_t p = spec.covariates.size();

  SimulationResult res;
  auto& data = res.data;
  for (std::size_t c = 0; c < p; ++c) data.covariate_names.push_back("z" + std::to_string(c + 1));
  data.covariates = Matrix(0, p);
  std::vector<double> rates;
  std::vector<double> z(p);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double lh;
    for (;;) {
      for (std::size_t c = 0; c < p; ++c) {
        const auto& g = spec.covariates[c];
        if (const auto* nc = std::get_if<NormalCovariate>(&g))
          z[c] = nc->mean + nc->sd * std_normal(rng);
        else {
          const auto& bc = std::get<BinaryCovariate>(g);
          z[c] = stats::uniform_open01(rng) < bc.q ? bc.high : bc.low;
        }
      }
      lh = log_hazard(spec.lambda0, dot(z, spec.beta), spec.gamma);
      if (std::isfinite(lh)) break;
      if (++res.redraws * 10 > spec.n)
        throw ConfigError("simulation: more than 10% of covariate draws give a negative hazard");
    }
    const double h = std::exp(lh);
    rates.push_back(h);
    data.time.push_back(-std::log(stats::uniform_open01(rng)) / h);
    data.status.push_back(1);
    data.covariates.append_row(z);
  }
  if (spec.censoring_rate) {
    res.censoring_bound = calibrate_censoring_bound(rates, *spec.censoring_rate);
    res.expected_censoring_rate = expected_censoring(rates, res.censoring_bound);
    for (std::size_t i = 0; i < spec.n; ++i) {
      const double c = res.censoring_bound * stats::uniform_open01(rng);
      if (c < data.time[i]) {
        data.time[i] = c;
        data.status[i] = 0;
      }
    }
  }
  return res;
}

}  // namespace bchaz
