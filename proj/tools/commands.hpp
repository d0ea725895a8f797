#pragma once

// Command implementations for the bchaz executable. Everything is driven
// through run(), which takes the argument list and output streams so the
// tests can call it in-process.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "bchaz/bchaz.hpp"

#ifndef BCHAZ_VERSION
#define BCHAZ_VERSION "0.0.0"
#endif

namespace bchaz::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitSampler = 3;

namespace fs = std::filesystem;

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char two[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(two, sizeof two, "%02x", md[i]);
    hex += two;
  }
  return hex;
}

inline std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Options

struct DataOptions {
  std::string data;
  std::string time_column = "time";
  std::string status_column = "status";
  std::vector<std::string> covariates;
};

struct ModelOptions {
  std::string constrained;
  std::vector<double> sigma{100.0};
  double alpha = 2.0;
  double xi = 0.01;
  std::size_t burn_in = 2000;
  std::size_t thin = 5;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  double metropolis_step = 0.5;
  std::size_t adapt_window = 25;
  double level = 0.95;
  std::size_t jobs = 1;
  std::string trace;
};

struct FitOptions {
  DataOptions data;
  ModelOptions model;
  double gamma = 0.5;
  std::size_t intervals = 5;
  std::vector<std::string> profiles;
  std::vector<double> times;
  std::string group_by;
  std::string out = "bchaz_out";
};

struct SelectOptions {
  DataOptions data;
  ModelOptions model;
  std::vector<double> gammas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::size_t> intervals{1, 5, 10};
  std::string out = "bchaz_out";
};

struct SimulateOptions {
  std::size_t n = 300;
  double gamma = 0.5;
  double lambda0 = 0.5;
  std::vector<double> beta{0.7, 1.0};
  std::vector<std::string> covariates{"normal:5:1", "binary:1:2:0.5"};
  std::string censoring = "uniform";
  double censoring_rate = 0.25;
  std::uint64_t seed = 1;
  std::string out = "bchaz_out";
};

struct DiagnoseOptions {
  std::string samples;
  std::string trace;
  double early = 0.1;
  double late = 0.5;
  std::string out = "bchaz_out";
};

struct RerunOptions {
  std::string manifest;
  std::string out;
};

inline void add_data_options(CLI::App* app, DataOptions& o) {
  app->add_option("--data", o.data, "Input CSV with time, status and covariate columns")->required();
  app->add_option("--time-column", o.time_column, "Name of the time column");
  app->add_option("--status-column", o.status_column, "Name of the event indicator column (1 = event)");
  app->add_option("--covariates", o.covariates, "Covariate columns to use, comma separated (default: all others)")
      ->delimiter(',');
}

inline void add_model_options(CLI::App* app, ModelOptions& o) {
  app->add_option("--constrained-covariate", o.constrained,
                  "Covariate whose coefficient carries the truncated prior (default: the first)");
  app->add_option("--sigma", o.sigma, "Prior SD of the coefficients; one value, or one per covariate")->delimiter(',');
  app->add_option("--alpha", o.alpha, "Gamma prior shape for each baseline level");
  app->add_option("--xi", o.xi, "Gamma prior rate for each baseline level");
  app->add_option("--burn-in", o.burn_in, "Burn-in sweeps");
  app->add_option("--thin", o.thin, "Keep every thin-th sweep after burn-in");
  app->add_option("--samples", o.samples, "Retained draws");
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--metropolis-step", o.metropolis_step, "Initial log-scale proposal SD for the baseline levels");
  app->add_option("--adapt-window", o.adapt_window, "Burn-in sweeps between proposal adaptations");
  app->add_option("--level", o.level, "HPD interval level");
  app->add_option("--jobs", o.jobs, "Worker threads");
  app->add_option("--trace", o.trace, "Write one NDJSON record per sweep to this file");
}

/// BCHAZ_<FLAG> environment override for every option of `app`.
inline void add_env_overrides(CLI::App* app) {
  for (CLI::Option* opt : app->get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help") continue;
    std::string env = "BCHAZ_";
    for (char c : names.front()) env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    opt->envname(env);
  }
}

/// Every option of `app` with its effective value, both as JSON and as an
/// explicit argument list that reproduces the run without defaults or
/// environment variables.
struct Resolved {
  Json config = Json::object();
  std::vector<std::string> args;
};

inline Resolved resolve(const CLI::App* app) {
  Resolved r;
  for (const CLI::Option* opt : app->get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help") continue;
    const std::string& name = names.front();
    std::vector<std::string> values;
    if (opt->count() > 0)
      values = opt->results();
    else if (!opt->get_default_str().empty() && opt->get_default_str() != "{}")  // "{}" is an empty list
      values = opt->as<std::vector<std::string>>();
    const bool multi = opt->get_expected_max() > 1;
    if (multi) {
      std::vector<std::string> flat;
      for (const auto& v : values) {
        if (opt->get_delimiter() != '\0') {
          for (auto piece : csv::split(v, opt->get_delimiter())) flat.emplace_back(csv::trim(piece));
        } else {
          flat.push_back(v);
        }
      }
      values = flat;
      r.config[name] = values;
    } else {
      r.config[name] = values.empty() ? Json(nullptr) : Json(values.back());
    }
    if (values.empty() || (!multi && values.back().empty())) continue;
    if (multi && opt->get_delimiter() != '\0') {
      std::string joined;
      for (std::size_t i = 0; i < values.size(); ++i) joined += (i ? std::string(1, opt->get_delimiter()) : "") + values[i];
      r.args.push_back("--" + name + "=" + joined);
    } else if (multi) {
      for (const auto& v : values) r.args.push_back("--" + name + "=" + v);
    } else {
      r.args.push_back("--" + name + "=" + values.back());
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Manifest

struct Manifest {
  std::string command;
  Resolved resolved;
  std::uint64_t seed = 0;
  std::string started;
  std::map<std::string, std::string> inputs;  // path -> sha256
  Json extra = Json::object();

  void write(const fs::path& dir, const std::vector<std::string>& output_files) const {
    Json j;
    j["command"] = command;
    j["argv"] = resolved.args;
    j["config"] = resolved.config;
    j["seed"] = seed;
    j["version"] = BCHAZ_VERSION;
    Json in = Json::object();
    for (const auto& [path, digest] : inputs) in[path] = digest;
    j["inputs"] = in;
    Json outs = Json::object();
    for (const auto& f : output_files) outs[f] = sha256_file((dir / f).string());
    j["outputs"] = outs;
    if (!extra.empty()) j["results"] = extra;
    j["started"] = started;
    j["finished"] = utc_now();
    write_file((dir / "manifest.json").string(), [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  }
};

inline void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

// ---------------------------------------------------------------------------
// Trace

class TraceWriter {
 public:
  explicit TraceWriter(const std::string& path) {
    if (path.empty()) return;
    out_.open(path);
    if (!out_) throw IoError("cannot open trace file '" + path + "'");
  }

  bool enabled() const { return out_.is_open(); }

  TraceSink sink(std::optional<std::size_t> cell = std::nullopt) {
    if (!enabled()) return {};
    return [this, cell](const TraceRecord& r) {
      Json j;
      if (cell) j["cell"] = *cell;
      j["iter"] = r.iteration;
      j["burn_in"] = r.burn_in;
      j["loglik"] = r.loglik;
      j["beta"] = r.state.beta;
      j["lambda"] = r.state.lambda;
      std::vector<bool> acc(r.lambda_accepted.begin(), r.lambda_accepted.end());
      j["lambda_accepted"] = acc;
      const std::string line = j.dump();
      std::lock_guard<std::mutex> lock(mu_);
      out_ << line << '\n';
    };
  }

 private:
  std::ofstream out_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Shared helpers

inline SurvivalDataset load_data(const DataOptions& o) {
  CsvSchema schema;
  schema.time_column = o.time_column;
  schema.status_column = o.status_column;
  schema.covariates = o.covariates;
  return read_dataset_file(o.data, schema);
}

inline std::size_t covariate_index(const SurvivalDataset& data, const std::string& name) {
  for (std::size_t c = 0; c < data.covariate_names.size(); ++c)
    if (data.covariate_names[c] == name) return c;
  throw ConfigError("unknown covariate '" + name + "'");
}

inline ModelConfig model_config(const SurvivalDataset& data, const ModelOptions& o, double gamma) {
  const std::size_t p = data.num_covariates();
  const std::size_t k = o.constrained.empty() ? 0 : covariate_index(data, o.constrained);
  ModelConfig cfg = ModelConfig::defaults(p, gamma, k);
  if (o.sigma.size() == 1)
    cfg.sigma.assign(p, o.sigma[0]);
  else if (o.sigma.size() == p)
    cfg.sigma = o.sigma;
  else
    throw ConfigError("--sigma needs one value or one per covariate (" + std::to_string(p) + ")");
  cfg.alpha = o.alpha;
  cfg.xi = o.xi;
  cfg.validate(p);
  return cfg;
}

inline SamplerSettings sampler_settings(const ModelOptions& o) {
  SamplerSettings s;
  s.burn_in = o.burn_in;
  s.thin = o.thin;
  s.samples = o.samples;
  s.seed = o.seed;
  s.metropolis_step = o.metropolis_step;
  s.adapt_window = o.adapt_window;
  s.validate();
  if (!(o.level > 0.0 && o.level < 1.0)) throw ConfigError("--level must lie in (0, 1)");
  if (o.jobs < 1) throw ConfigError("--jobs must be at least 1");
  return s;
}

inline std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> v;
  for (auto piece : csv::split(text)) {
    auto x = csv::parse_double(csv::trim(piece));
    if (!x) throw ConfigError(what + ": '" + text + "' is not a comma-separated list of numbers");
    v.push_back(*x);
  }
  return v;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// fit

inline int cmd_fit(const FitOptions& o, Manifest& manifest, std::ostream& out) {
  const SurvivalDataset data = load_data(o.data);
  manifest.inputs[o.data.data] = sha256_file(o.data.data);
  const ModelConfig cfg = model_config(data, o.model, o.gamma);
  const SamplerSettings settings = sampler_settings(o.model);
  const TimePartition partition = build_partition(data, o.intervals);
  const std::size_t p = data.num_covariates();

  std::vector<std::pair<std::string, std::vector<double>>> profiles;
  {
    std::vector<double> mean(p, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t c = 0; c < p; ++c) mean[c] += data.covariates(i, c) / static_cast<double>(data.size());
    profiles.emplace_back("mean", mean);
  }
  for (std::size_t k = 0; k < o.profiles.size(); ++k) {
    auto z = parse_numbers(o.profiles[k], "--profile");
    if (z.size() != p) throw ConfigError("--profile needs " + std::to_string(p) + " values, got '" + o.profiles[k] + "'");
    profiles.emplace_back("profile" + std::to_string(k + 1), z);
  }
  std::vector<double> times = o.times;
  if (times.empty())
    for (int k = 0; k <= 20; ++k) times.push_back(k == 20 ? partition.end() : partition.end() * k / 20.0);
  std::optional<std::size_t> group_col;
  if (!o.group_by.empty()) group_col = covariate_index(data, o.group_by);

  ensure_directory(o.out);
  TraceWriter trace(o.model.trace);
  const ChainOutput chain = run_chain(data, partition, cfg, settings, trace.sink());
  const FitStatistics fit = fit_statistics(chain, data, o.model.jobs);
  const PosteriorSummary summary = summarize(chain, o.model.level);
  std::optional<GewekeReport> geweke;
  if (chain.size() >= 100) geweke = geweke_diagnostic(chain);

  std::vector<CurveRow> rows;
  for (const auto& [label, z] : profiles) {
    auto r = profile_curves(chain, z, times, label);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  append_nelson_aalen(rows, nelson_aalen(data), "all");
  if (group_col) {
    std::vector<double> labels(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data.covariates(i, *group_col);
    for (const auto& [value, curve] : nelson_aalen<double>(data, labels))
      append_nelson_aalen(rows, curve, o.group_by + "=" + csv::format(value));
  }

  const fs::path dir(o.out);
  const Json summary_doc = summary_json(chain, data.covariate_names, summary, fit, geweke);
  write_file((dir / "summary.json").string(), [&](std::ostream& s) { s << summary_doc.dump(2) << '\n'; });
  write_file((dir / "samples.csv").string(), [&](std::ostream& s) { write_samples_csv(s, chain); });
  write_file((dir / "curves.csv").string(), [&](std::ostream& s) { write_curves_csv(s, rows); });
  manifest.seed = settings.seed;
  manifest.extra["B"] = fit.B;
  manifest.extra["dic"] = std::isnan(fit.dic) ? Json(nullptr) : Json(fit.dic);
  manifest.write(dir, {"summary.json", "samples.csv", "curves.csv"});

  out << "gamma " << format_number(o.gamma) << ", J " << o.intervals << ", " << chain.size() << " draws\n";
  for (const auto& s : summary.parameters)
    out << "  " << s.name << "  mean " << format_number(s.mean) << "  sd " << format_number(s.sd) << "  HPD ["
        << format_number(s.hpd_low) << ", " << format_number(s.hpd_high) << "]\n";
  out << "  B " << format_number(fit.B) << "  DIC "
      << (std::isnan(fit.dic) ? "undefined (" + fit.dic_error + ")" : format_number(fit.dic)) << '\n';
  out << "wrote " << o.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// select

inline int cmd_select(const SelectOptions& o, Manifest& manifest, std::ostream& out, std::ostream& err) {
  const SurvivalDataset data = load_data(o.data);
  manifest.inputs[o.data.data] = sha256_file(o.data.data);
  if (o.gammas.empty() || o.intervals.empty()) throw ConfigError("--gammas and --intervals-list must be non-empty");
  for (double g : o.gammas)
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("every gamma must lie in [0, 1]");
  const ModelConfig base = model_config(data, o.model, o.gammas.front());
  const SamplerSettings settings = sampler_settings(o.model);

  ensure_directory(o.out);
  TraceWriter trace(o.model.trace);
  std::function<TraceSink(std::size_t)> sinks;
  if (trace.enabled()) sinks = [&trace](std::size_t c) { return trace.sink(c); };
  const GridResult grid = run_grid(data, o.gammas, o.intervals, base, settings, o.model.jobs, o.model.level, sinks);

  const fs::path dir(o.out);
  write_file((dir / "grid.csv").string(), [&](std::ostream& s) { write_grid_csv(s, grid); });
  manifest.seed = settings.seed;
  std::size_t ok = 0;
  for (const auto& c : grid.cells) ok += c.ok;
  manifest.extra["cells"] = grid.cells.size();
  manifest.extra["succeeded"] = ok;
  if (grid.best_by_B) manifest.extra["best_by_B"] = {{"gamma", grid.cells[*grid.best_by_B].gamma}, {"J", grid.cells[*grid.best_by_B].J}};
  if (grid.best_by_dic)
    manifest.extra["best_by_dic"] = {{"gamma", grid.cells[*grid.best_by_dic].gamma}, {"J", grid.cells[*grid.best_by_dic].J}};
  manifest.write(dir, {"grid.csv"});

  for (const auto& c : grid.cells) {
    out << "gamma " << format_number(c.gamma) << "  J " << c.J << "  ";
    if (c.ok)
      out << "B " << format_number(c.fit.B) << "  DIC " << (std::isnan(c.fit.dic) ? "undefined" : format_number(c.fit.dic))
          << '\n';
    else
      out << "failed: " << c.error << '\n';
  }
  out << "wrote " << o.out << '\n';
  if (ok == 0) {
    err << "error: every grid cell failed\n";
    return kExitSampler;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

inline CovariateGenerator parse_generator(const std::string& text) {
  const auto parts = csv::split(text, ':');
  std::vector<double> v;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    auto x = csv::parse_double(csv::trim(parts[i]));
    if (!x) throw ConfigError("covariate generator '" + text + "': bad number");
    v.push_back(*x);
  }
  const std::string kind(csv::trim(parts[0]));
  if (kind == "normal" && v.size() == 2) return NormalCovariate{v[0], v[1]};
  if (kind == "binary" && v.size() == 3) return BinaryCovariate{v[0], v[1], v[2]};
  throw ConfigError("covariate generator '" + text + "': expected normal:<mean>:<sd> or binary:<a>:<b>:<q>");
}

inline int cmd_simulate(const SimulateOptions& o, Manifest& manifest, std::ostream& out) {
  SimulationSpec spec;
  spec.n = o.n;
  spec.gamma = o.gamma;
  spec.lambda0 = o.lambda0;
  spec.beta = o.beta;
  spec.covariates.clear();
  for (const auto& g : o.covariates) spec.covariates.push_back(parse_generator(g));
  if (o.censoring == "none")
    spec.censoring_rate = std::nullopt;
  else if (o.censoring == "uniform")
    spec.censoring_rate = o.censoring_rate;
  else
    throw ConfigError("--censoring must be 'uniform' or 'none'");
  spec.seed = o.seed;
  const SimulationResult sim = simulate(spec);

  ensure_directory(o.out);
  const fs::path dir(o.out);
  write_file((dir / "data.csv").string(), [&](std::ostream& s) { write_dataset(s, sim.data); });
  manifest.seed = o.seed;
  const double observed = 1.0 - static_cast<double>(sim.data.num_events()) / static_cast<double>(sim.data.size());
  manifest.extra["censoring_bound"] = std::isfinite(sim.censoring_bound) ? Json(sim.censoring_bound) : Json(nullptr);
  manifest.extra["expected_censoring_rate"] = sim.expected_censoring_rate;
  manifest.extra["observed_censoring_rate"] = observed;
  manifest.extra["redraws"] = sim.redraws;
  manifest.write(dir, {"data.csv"});

  out << sim.data.size() << " subjects, " << format_number(100.0 * observed) << "% censored";
  if (std::isfinite(sim.censoring_bound)) out << " (uniform bound " << format_number(sim.censoring_bound) << ")";
  if (sim.redraws) out << ", " << sim.redraws << " covariate redraws";
  out << "\nwrote " << (dir / "data.csv").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// diagnose

/// Post burn-in acceptance rate per baseline level from an NDJSON trace.
inline std::vector<double> trace_acceptance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file '" + path + "'");
  std::vector<double> accepted;
  std::size_t sweeps = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception&) {
      throw IngestionError("trace is not valid NDJSON", line_no);
    }
    if (!j.contains("lambda_accepted") || !j["lambda_accepted"].is_array())
      throw IngestionError("trace record lacks lambda_accepted", line_no);
    if (j.value("burn_in", false)) continue;
    const auto& acc = j["lambda_accepted"];
    if (accepted.empty()) accepted.assign(acc.size(), 0.0);
    if (acc.size() != accepted.size()) throw IngestionError("trace records disagree on the interval count", line_no);
    for (std::size_t k = 0; k < acc.size(); ++k) accepted[k] += acc[k].get<bool>() ? 1.0 : 0.0;
    ++sweeps;
  }
  for (double& a : accepted) a /= static_cast<double>(std::max<std::size_t>(sweeps, 1));
  return accepted;
}

inline int cmd_diagnose(const DiagnoseOptions& o, Manifest& manifest, std::ostream& out) {
  std::ifstream in(o.samples);
  if (!in) throw IoError("cannot open samples file '" + o.samples + "'");
  const ChainOutput chain = read_samples_csv(in);
  manifest.inputs[o.samples] = sha256_file(o.samples);
  const GewekeReport g = geweke_diagnostic(chain, o.early, o.late);

  Json report;
  report["draws"] = chain.size();
  report["early_fraction"] = o.early;
  report["late_fraction"] = o.late;
  report["geweke_z"] = geweke_json(g);
  std::size_t flagged = 0, large = 0;
  for (const auto& z : g.z) {
    flagged += !z;
    large += z && std::abs(*z) >= 3.0;
  }
  report["flagged"] = flagged;
  report["abs_z_at_least_3"] = large;
  if (!o.trace.empty()) {
    report["lambda_acceptance"] = trace_acceptance(o.trace);
    manifest.inputs[o.trace] = sha256_file(o.trace);
  }

  ensure_directory(o.out);
  const fs::path dir(o.out);
  write_file((dir / "diagnostics.json").string(), [&](std::ostream& s) { s << report.dump(2) << '\n'; });
  manifest.write(dir, {"diagnostics.json"});
  out << report.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Entry point

/// Prints the message and maps the error to an exit code: 3 when the sampler
/// could not start, 2 for everything the user can fix in the input.
inline int report_error(const Error& e, std::ostream& err) {
  if (dynamic_cast<const InitializationError*>(&e)) {
    err << "error: sampler initialization failed: " << e.what() << '\n';
    return kExitSampler;
  }
  err << "error: " << e.what() << '\n';
  return kExitUsage;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

inline int cmd_rerun(const RerunOptions& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(o.manifest);
  if (!in) throw IoError("cannot open manifest '" + o.manifest + "'");
  Json m;
  try {
    m = Json::parse(in);
  } catch (const Json::exception& e) {
    throw IngestionError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!m.contains("command") || !m.contains("argv")) throw IngestionError("manifest lacks command or argv");
  const auto command = m["command"].get<std::string>();
  if (command == "rerun") throw ConfigError("manifest records a rerun");
  if (m.value("version", "") != BCHAZ_VERSION)
    err << "warning: manifest written by version " << m.value("version", "?") << ", this is " << BCHAZ_VERSION << '\n';
  std::vector<std::string> args{command};
  for (const auto& a : m["argv"]) {
    auto s = a.get<std::string>();
    if (!o.out.empty() && s.rfind("--out=", 0) == 0) s = "--out=" + o.out;
    if (!o.out.empty() && s.rfind("--trace=", 0) == 0 && command != "diagnose")
      s = "--trace=" + (fs::path(o.out) / "trace.ndjson").string();
    args.push_back(s);
  }
  return run(args, out, err);
}

/// `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian Box-Cox transformation hazard models with a piecewise exponential baseline", "bchaz"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", BCHAZ_VERSION);
  app.require_subcommand(1);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one (gamma, J) model and summarize the posterior");
  add_data_options(fit_cmd, fit.data);
  fit_cmd->add_option("--gamma", fit.gamma, "Box-Cox index in [0, 1]; 0 is proportional, 1 additive hazards");
  fit_cmd->add_option("--intervals", fit.intervals, "Number J of baseline intervals");
  add_model_options(fit_cmd, fit.model);
  fit_cmd->add_option("--profile", fit.profiles,
                      "Covariate profile for predicted curves, comma separated (repeatable; the covariate means are "
                      "always included)");
  fit_cmd->add_option("--times", fit.times, "Times for predicted survival (default: 21 points on [0, s_J])")
      ->delimiter(',');
  fit_cmd->add_option("--group-by", fit.group_by, "Covariate whose distinct values define Nelson-Aalen groups");
  fit_cmd->add_option("--out", fit.out, "Output directory");

  SelectOptions sel;
  auto* sel_cmd = app.add_subcommand("select", "Fit a (gamma, J) grid and compare cells by B and DIC");
  add_data_options(sel_cmd, sel.data);
  sel_cmd->add_option("--gammas", sel.gammas, "Gamma grid, comma separated")->delimiter(',');
  sel_cmd->add_option("--intervals-list", sel.intervals, "J grid, comma separated")->delimiter(',');
  add_model_options(sel_cmd, sel.model);
  sel_cmd->add_option("--out", sel.out, "Output directory");

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate survival data with a constant baseline hazard");
  sim_cmd->add_option("--n", sim.n, "Sample size");
  sim_cmd->add_option("--gamma", sim.gamma, "Generating gamma");
  sim_cmd->add_option("--lambda0", sim.lambda0, "Constant baseline hazard");
  sim_cmd->add_option("--beta", sim.beta, "Coefficients, comma separated")->delimiter(',');
  sim_cmd->add_option("--covariate", sim.covariates,
                      "Covariate generators in order, normal:<mean>:<sd> or binary:<a>:<b>:<q> (repeatable)");
  sim_cmd->add_option("--censoring", sim.censoring, "uniform or none")->check(CLI::IsMember({"uniform", "none"}));
  sim_cmd->add_option("--censoring-rate", sim.censoring_rate, "Target censoring fraction for uniform censoring");
  sim_cmd->add_option("--seed", sim.seed, "Random seed");
  sim_cmd->add_option("--out", sim.out, "Output directory");

  DiagnoseOptions diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "Geweke diagnostics for a samples CSV");
  diag_cmd->add_option("--samples", diag.samples, "Samples CSV written by fit")->required();
  diag_cmd->add_option("--trace", diag.trace, "NDJSON trace written by fit --trace, for acceptance rates");
  diag_cmd->add_option("--early", diag.early, "Fraction of draws in the early window");
  diag_cmd->add_option("--late", diag.late, "Fraction of draws in the late window");
  diag_cmd->add_option("--out", diag.out, "Output directory");

  RerunOptions rerun;
  auto* rerun_cmd = app.add_subcommand("rerun", "Repeat the run recorded in a manifest");
  rerun_cmd->add_option("--manifest", rerun.manifest, "manifest.json of an earlier run")->required();
  rerun_cmd->add_option("--out", rerun.out, "Output directory (default: the recorded one)");

  for (auto* sub : {fit_cmd, sel_cmd, sim_cmd, diag_cmd}) add_env_overrides(sub);

  CLI::App* active = nullptr;
  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
    for (auto* sub : app.get_subcommands()) active = sub;
    if (active == rerun_cmd) return cmd_rerun(rerun, out, err);

    Manifest manifest;
    manifest.command = active->get_name();
    manifest.resolved = resolve(active);
    manifest.started = utc_now();
    if (active == fit_cmd) return cmd_fit(fit, manifest, out);
    if (active == sel_cmd) return cmd_select(sel, manifest, out, err);
    if (active == sim_cmd) return cmd_simulate(sim, manifest, out);
    return cmd_diagnose(diag, manifest, out);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.back()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << BCHAZ_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.back()->help());
    return kExitUsage;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

}  // namespace bchaz::cli
