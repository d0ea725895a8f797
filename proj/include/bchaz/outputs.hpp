#pragma once

// Output artifacts: samples CSV, summary JSON, grid CSV and curves CSV.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "data.hpp"
#include "errors.hpp"
#include "inference.hpp"
#include "sampler.hpp"
#include "selection.hpp"

namespace bchaz {

using Json = nlohmann::ordered_json;

/// Opens `path` for writing, hands the stream to `write`, and checks the
/// stream afterwards.
inline void write_file(const std::string& path, const std::function<void(std::ostream&)>& write) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  write(out);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Samples CSV: iter,beta_1..beta_p,lambda_1..lambda_J,loglik

inline void write_samples_csv(std::ostream& out, const ChainOutput& chain) {
  out << "iter";
  for (const auto& n : chain.names()) out << ',' << n;
  out << ",loglik\n";
  for (std::size_t m = 0; m < chain.size(); ++m) {
    out << chain.iteration[m];
    for (double v : chain.row(m)) out << ',' << csv::format(v);
    out << ',' << csv::format(chain.loglik[m]) << '\n';
  }
}

/// Reads a samples CSV back into a ChainOutput. Only the draws, the
/// log-likelihoods, the iteration numbers and p, J are restored.
inline ChainOutput read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("samples file is empty");
  const auto header = csv::split(line);
  if (header.size() < 3 || header.front() != "iter" || header.back() != "loglik")
    throw IngestionError("samples header must read iter,<parameters...>,loglik");
  ChainOutput chain;
  std::size_t c = 1;
  while (c + 1 < header.size() && header[c] == "beta_" + std::to_string(chain.p + 1)) ++chain.p, ++c;
  while (c + 1 < header.size() && header[c] == "lambda_" + std::to_string(chain.J + 1)) ++chain.J, ++c;
  if (c + 1 != header.size())
    throw IngestionError("unexpected samples column '" + std::string(header[c]) + "'");
  if (chain.J == 0) throw IngestionError("samples file has no lambda columns");

  std::size_t row = 0;
  std::vector<double> values(chain.width());
  while (std::getline(in, line)) {
    ++row;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != header.size())
      throw IngestionError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()),
                           row);
    const auto iter = csv::parse_double(f[0]);
    if (!iter || *iter < 0.0 || *iter != std::floor(*iter)) throw IngestionError("bad iteration number", row);
    for (std::size_t k = 0; k < chain.width(); ++k) {
      const auto v = csv::parse_double(f[k + 1]);
      if (!v) throw IngestionError("non-numeric value in column '" + std::string(header[k + 1]) + "'", row);
      values[k] = *v;
    }
    const auto ll = csv::parse_double(f.back());
    if (!ll) throw IngestionError("non-numeric loglik", row);
    chain.draws.insert(chain.draws.end(), values.begin(), values.end());
    chain.loglik.push_back(*ll);
    chain.iteration.push_back(static_cast<std::size_t>(*iter));
  }
  return chain;
}

// ---------------------------------------------------------------------------
// Summary JSON.

namespace detail {

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

inline Json config_json(const ChainOutput& chain, const std::vector<std::string>& covariate_names) {
  const auto& cfg = chain.config;
  const auto& s = chain.settings;
  Json j;
  j["gamma"] = cfg.gamma;
  j["intervals"] = chain.J;
  j["cut_points"] = chain.partition.cuts;
  j["covariates"] = covariate_names;
  j["constrained_covariate"] =
      cfg.constrained < covariate_names.size() ? Json(covariate_names[cfg.constrained]) : Json(nullptr);
  j["sigma"] = cfg.sigma;
  j["alpha"] = cfg.alpha;
  j["xi"] = cfg.xi;
  j["burn_in"] = s.burn_in;
  j["thin"] = s.thin;
  j["samples"] = s.samples;
  j["seed"] = s.seed;
  j["metropolis_step"] = s.metropolis_step;
  j["adapt_window"] = s.adapt_window;
  return j;
}

inline Json summaries_json(const PosteriorSummary& summary) {
  Json arr = Json::array();
  for (const auto& p : summary.parameters)
    arr.push_back({{"name", p.name},
                   {"mean", p.mean},
                   {"sd", p.sd},
                   {"hpd_low", p.hpd_low},
                   {"hpd_high", p.hpd_high},
                   {"mcse", detail::number_or_null(p.mcse)}});
  return arr;
}

inline Json fit_json(const FitStatistics& fit) {
  Json j;
  j["B"] = detail::number_or_null(fit.B);
  j["dic"] = detail::number_or_null(fit.dic);
  j["dev_mean"] = detail::number_or_null(fit.dev_mean);
  j["dev_at_mean"] = detail::number_or_null(fit.dev_at_mean);
  if (!fit.dic_error.empty()) j["dic_error"] = fit.dic_error;
  Json cpo = Json::array(), cv = Json::array();
  for (double v : fit.cpo) cpo.push_back(v);
  for (double v : fit.cpo_cv) cv.push_back(detail::number_or_null(v));
  j["cpo"] = cpo;
  j["cpo_cv"] = cv;
  return j;
}

inline Json geweke_json(const std::optional<GewekeReport>& g) {
  Json arr = Json::array();
  if (!g) return arr;
  for (std::size_t c = 0; c < g->z.size(); ++c)
    arr.push_back({{"name", g->names[c]}, {"z", g->z[c] ? Json(*g->z[c]) : Json(nullptr)}, {"flagged", !g->z[c]}});
  return arr;
}

inline Json chain_stats_json(const ChainStatistics& s) {
  Json j;
  j["lambda_acceptance"] = s.lambda_acceptance;
  j["lambda_step"] = s.lambda_step;
  j["beta_fallbacks"] = s.beta_fallbacks;
  j["ars"] = {{"draws", s.ars.draws},
              {"proposals", s.ars.proposals},
              {"squeeze_rate", s.ars.squeeze_rate()},
              {"evaluations", s.ars.evaluations},
              {"nonconcave_draws", s.ars.nonconcave_draws},
              {"metropolis_rejections", s.ars.metropolis_rejections},
              {"failures", s.ars.failures}};
  return j;
}

inline Json summary_json(const ChainOutput& chain, const std::vector<std::string>& covariate_names,
                         const PosteriorSummary& summary, const FitStatistics& fit,
                         const std::optional<GewekeReport>& geweke) {
  Json j;
  j["config"] = config_json(chain, covariate_names);
  j["level"] = summary.level;
  j["summaries"] = summaries_json(summary);
  j["fit"] = fit_json(fit);
  Json diag;
  diag["geweke_z"] = geweke_json(geweke);
  if (!geweke) diag["geweke_note"] = "chain shorter than 100 draws";
  diag["sampler"] = chain_stats_json(chain.stats);
  j["diagnostics"] = diag;
  return j;
}

// ---------------------------------------------------------------------------
// Grid CSV: gamma,J,B,DIC,status. status is "ok", optionally followed by
// ";best_B" and ";best_DIC", or "failed: <reason>".

inline void write_grid_csv(std::ostream& out, const GridResult& grid) {
  out << "gamma,J,B,DIC,status\n";
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    const auto& cell = grid.cells[c];
    out << csv::format(cell.gamma) << ',' << cell.J << ',';
    if (!cell.ok) {
      std::string reason = cell.error;
      for (char& ch : reason)
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ' ';
      out << ",,failed: " << reason << '\n';
      continue;
    }
    out << csv::format(cell.fit.B) << ',';
    if (!std::isnan(cell.fit.dic)) out << csv::format(cell.fit.dic);
    out << ",ok";
    if (grid.best_by_B == c) out << ";best_B";
    if (grid.best_by_dic == c) out << ";best_DIC";
    if (std::isnan(cell.fit.dic)) out << ";dic_undefined";
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Curves CSV: kind,group,time,value.

struct CurveRow {
  std::string kind;   // survival, hazard, hazard_step, nelson_aalen
  std::string group;  // profile or group label
  double time;
  double value;
};

inline void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "kind,group,time,value\n";
  for (const auto& r : rows) out << r.kind << ',' << r.group << ',' << csv::format(r.time) << ',' << csv::format(r.value) << '\n';
}

/// Posterior predictive survival at `times`, hazards at interval midpoints
/// and the step-function endpoints of the hazard, for one profile.
inline std::vector<CurveRow> profile_curves(const ChainOutput& chain, std::span<const double> z,
                                            std::span<const double> times, const std::string& group) {
  std::vector<CurveRow> rows;
  const auto surv = predict_survival(chain, z, times);
  for (std::size_t i = 0; i < times.size(); ++i) rows.push_back({"survival", group, times[i], surv.survival[i]});
  const auto mids = interval_midpoints(chain.partition);
  const auto h = hazard_curve(chain, z, mids);
  for (std::size_t j = 0; j < mids.size(); ++j) rows.push_back({"hazard", group, mids[j], h[j]});
  for (std::size_t j = 0; j < mids.size(); ++j) {
    rows.push_back({"hazard_step", group, chain.partition.cuts[j], h[j]});
    rows.push_back({"hazard_step", group, chain.partition.cuts[j + 1], h[j]});
  }
  return rows;
}

inline void append_nelson_aalen(std::vector<CurveRow>& rows, const CumulativeHazardCurve& curve,
                                const std::string& group) {
  rows.push_back({"nelson_aalen", group, 0.0, 0.0});
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    rows.push_back({"nelson_aalen", group, curve.times[i], curve.cumulative_hazard[i]});
}

}  // namespace bchaz
