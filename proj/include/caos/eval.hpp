#pragma once

// Evaluation metrics, experiment orchestration and report emission.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "caos/caos.hpp"
#include "caos/core.hpp"
#include "caos/methods.hpp"
#include "caos/simlab.hpp"
#include "caos/tensor_io.hpp"

namespace caos {

inline double empirical_coverage(std::span<const PredictionSet> sets, std::span<const Label> truths) {
  if (sets.size() != truths.size())
    throw PreconditionError("coverage: " + std::to_string(sets.size()) + " sets but " +
                            std::to_string(truths.size()) + " truth labels");
  if (sets.empty()) throw PreconditionError("coverage: no prediction sets");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) hits += sets[i].contains(truths[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(sets.size());
}

inline MeanSem average_size(std::span<const PredictionSet> sets) {
  if (sets.empty()) throw PreconditionError("average size: no prediction sets");
  std::vector<double> sizes;
  sizes.reserve(sets.size());
  for (const auto& s : sets) sizes.push_back(static_cast<double>(s.size()));
  return mean_sem(sizes);
}

struct ReportRow {
  std::string method;
  double alpha = 0.0;
  std::size_t k = 0;
  std::size_t n = 0;
  std::size_t num_test = 0;  // test points per trial
  std::size_t trials = 0;
  double coverage = 0.0;
  double coverage_sem = 0.0;
  double size = 0.0;
  double size_sem = 0.0;
  std::string flags;
  std::size_t count = 0;  // records behind the row; not part of the CSV schema
};

// `rows` pool every (trial, test point) record; `by_task` first averages
// within each trial and reports the spread across trials.
struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<ReportRow> by_task;
  std::vector<Record> records;
};

using InputSource = std::variant<ScoreTensor, SyntheticTaskSpec>;

namespace detail {

inline std::string row_flags(Method m, std::span<const Record> recs) {
  std::string flags = method_flags(m);
  if (std::any_of(recs.begin(), recs.end(), [](const Record& r) { return r.oracle_fallback; }))
    flags += flags.empty() ? "oracle-fallback" : ";oracle-fallback";
  return flags;
}

inline void summarize_into(EvalReport& report, const std::vector<Method>& methods, const std::vector<double>& alphas,
                           std::size_t k, std::size_t n, std::size_t num_test, std::size_t trials) {
  for (double alpha : alphas)
    for (Method m : methods) {
      std::vector<Record> recs;
      for (const auto& r : report.records)
        if (r.method == m && r.alpha == alpha && r.k == k) recs.push_back(r);
      std::vector<double> cov, size;
      std::map<std::uint64_t, std::pair<std::vector<double>, std::vector<double>>> per_trial;
      for (const auto& r : recs) {
        cov.push_back(r.covered);
        size.push_back(r.set_size);
        per_trial[r.trial].first.push_back(r.covered);
        per_trial[r.trial].second.push_back(r.set_size);
      }
      const auto c = mean_sem(cov), s = mean_sem(size);
      const std::string flags = row_flags(m, recs);
      report.rows.push_back(ReportRow{std::string(method_tag(m)), alpha, k, n, num_test, trials, c.mean, c.sem,
                                      s.mean, s.sem, flags, recs.size()});
      std::vector<double> task_cov, task_size;
      for (const auto& [trial, v] : per_trial) {
        task_cov.push_back(mean_sem(v.first).mean);
        task_size.push_back(mean_sem(v.second).mean);
      }
      const auto tc = mean_sem(task_cov), ts = mean_sem(task_size);
      report.by_task.push_back(ReportRow{std::string(method_tag(m)), alpha, k, n, num_test, trials, tc.mean, tc.sem,
                                         ts.mean, ts.sem, flags, per_trial.size()});
    }
}

inline bool needs(const std::vector<Method>& ms, bool (*pred)(Method)) {
  return std::any_of(ms.begin(), ms.end(), pred);
}

}  // namespace detail

// Runs every requested method at every alpha on identical data and splits.
inline EvalReport run_experiment(const ExperimentConfig& config, const InputSource& source) {
  EvalReport report;
  if (const auto* tensor = std::get_if<ScoreTensor>(&source)) {
    config.validate(tensor->n());
    if (detail::needs(config.methods, method_needs_full) && !tensor->has_full())
      throw DataError("methods: full_caos needs the test-induced block (full.csv)");
    if (detail::needs(config.methods, method_needs_calib) && !tensor->has_calib())
      throw DataError("methods: scos_best needs the calibration-by-label block (calib.csv)");
    const MethodOptions opt{config.k, config.ref_fraction, true};
    std::vector<std::vector<Record>> per_alpha(config.alphas.size());
    parallel_for(config.alphas.size(), config.workers, [&](std::size_t a) {
      per_alpha[a] = evaluate_methods(*tensor, config.methods, config.alphas[a], opt, 0);
    });
    for (auto& v : per_alpha) report.records.insert(report.records.end(), v.begin(), v.end());
    detail::summarize_into(report, config.methods, config.alphas, config.k, tensor->n(), tensor->num_test(), 1);
  } else {
    const auto& spec = std::get<SyntheticTaskSpec>(source);
    spec.validate();
    config.validate(spec.n);
    SyntheticTaskSpec s = spec;
    s.with_full = detail::needs(config.methods, method_needs_full);
    s.with_calib = detail::needs(config.methods, method_needs_calib);
    const SimOptions opt{config.alphas, config.k, config.trials, config.seed, config.methods, config.ref_fraction,
                         config.workers};
    auto outcomes = run_trials(s, opt);
    for (auto& o : outcomes) report.records.insert(report.records.end(), o.records.begin(), o.records.end());
    detail::summarize_into(report, config.methods, config.alphas, config.k, spec.n, spec.num_test, config.trials);
  }
  return report;
}

// One experiment per k with everything else fixed, concatenated in k order.
inline EvalReport ablate_k(const ExperimentConfig& config, const InputSource& source,
                           const std::vector<std::size_t>& k_values) {
  const std::size_t n = std::holds_alternative<ScoreTensor>(source) ? std::get<ScoreTensor>(source).n()
                                                                     : std::get<SyntheticTaskSpec>(source).n;
  if (k_values.empty()) throw ConfigError("k: at least one value required");
  for (std::size_t k : k_values)
    if (k < 1 || k + 1 > n)
      throw ConfigError("k: value " + std::to_string(k) + " outside [1, n-1] = [1, " + std::to_string(n - 1) + "]");
  EvalReport out;
  for (std::size_t k : k_values) {
    ExperimentConfig c = config;
    c.k = k;
    auto r = run_experiment(c, source);
    out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
    out.by_task.insert(out.by_task.end(), r.by_task.begin(), r.by_task.end());
    out.records.insert(out.records.end(), r.records.begin(), r.records.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Emission.

inline constexpr std::string_view kSummaryHeader =
    "method,alpha,k,n,T,trials,coverage,coverage_sem,size,size_sem,flags";

inline void write_summary_csv(std::ostream& os, std::span<const ReportRow> rows) {
  os << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    os << r.method << ',' << format_double(r.alpha) << ',' << r.k << ',' << r.n << ',' << r.num_test << ','
       << r.trials << ',' << format_double(r.coverage) << ',' << format_double(r.coverage_sem) << ','
       << format_double(r.size) << ',' << format_double(r.size_sem) << ',' << r.flags << '\n';
  }
}

inline nlohmann::ordered_json record_json(const Record& r) {
  nlohmann::ordered_json j;
  j["trial"] = r.trial;
  j["test_index"] = r.test_index;
  j["method"] = method_tag(r.method);
  j["alpha"] = r.alpha;
  j["k"] = r.k;
  j["set_size"] = r.set_size;
  j["covered"] = r.covered;
  j["threshold"] = r.threshold;
  return j;
}

inline void write_records_jsonl(std::ostream& os, std::span<const Record> records) {
  for (const auto& r : records) os << record_json(r).dump() << '\n';
}

enum class ReportFormat { kCsv, kJsonl, kBoth };

inline ReportFormat parse_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "jsonl") return ReportFormat::kJsonl;
  if (s == "both") return ReportFormat::kBoth;
  throw ConfigError("format: expected csv, jsonl or both, got '" + std::string(s) + "'");
}

// Writes summary.csv and summary_by_task.csv (csv) and records.jsonl
// (jsonl) into `dir`.
inline void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + p.string());
    return f;
  };
  if (format != ReportFormat::kJsonl) {
    auto f = open(dir / "summary.csv");
    write_summary_csv(f, report.rows);
    auto g = open(dir / "summary_by_task.csv");
    write_summary_csv(g, report.by_task);
    if (!f || !g) throw DataError("write failed in " + dir.string());
  }
  if (format != ReportFormat::kCsv) {
    auto f = open(dir / "records.jsonl");
    write_records_jsonl(f, report.records);
    if (!f) throw DataError("write failed in " + dir.string());
  }
}

// Parses a summary CSV written by write_summary_csv. Throws DataError on
// any schema deviation.
inline std::vector<ReportRow> parse_summary_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kSummaryHeader) throw DataError("summary csv: unexpected header");
  std::vector<ReportRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 11) throw DataError("summary csv: line " + std::to_string(lineno) + " has wrong column count");
    ReportRow r;
    r.method = std::string(f[0]);
    parse_method(r.method);
    r.alpha = detail::parse_score(f[1], "summary", lineno, 1);
    r.k = detail::parse_index(f[2], "summary", lineno, 2);
    r.n = detail::parse_index(f[3], "summary", lineno, 3);
    r.num_test = detail::parse_index(f[4], "summary", lineno, 4);
    r.trials = detail::parse_index(f[5], "summary", lineno, 5);
    r.coverage = detail::parse_score(f[6], "summary", lineno, 6);
    r.coverage_sem = detail::parse_score(f[7], "summary", lineno, 7);
    r.size = detail::parse_score(f[8], "summary", lineno, 8);
    r.size_sem = detail::parse_score(f[9], "summary", lineno, 9);
    r.flags = std::string(f[10]);
    if (r.coverage < 0.0 || r.coverage > 1.0) throw DataError("summary csv: coverage outside [0,1]");
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<Record> parse_records_jsonl(std::istream& is) {
  std::vector<Record> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    Record r;
    r.trial = j.at("trial").get<std::uint64_t>();
    r.test_index = j.at("test_index").get<std::size_t>();
    r.method = parse_method(j.at("method").get<std::string>());
    r.alpha = j.at("alpha").get<double>();
    r.k = j.at("k").get<std::size_t>();
    r.set_size = j.at("set_size").get<double>();
    r.covered = j.at("covered").get<double>();
    r.threshold = j.at("threshold").get<double>();
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config documents: one `key = value` per line, '#' starts a comment.
// Lists are comma separated.

struct RunConfig {
  ExperimentConfig experiment;
  SyntheticTaskSpec synthetic;
  std::optional<std::filesystem::path> tensor;
  std::optional<std::filesystem::path> out;
  ReportFormat format = ReportFormat::kBoth;
  std::vector<std::size_t> k_values;
};

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

inline double config_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t config_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  return out;
}

inline std::vector<std::string> config_list(const std::string& v) {
  std::vector<std::string> out;
  for (auto f : split_fields(v))
    if (!f.empty()) out.emplace_back(f);
  return out;
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  auto& e = cfg.experiment;
  auto& s = cfg.synthetic;
  if (key == "alpha") {
    e.alphas.clear();
    for (const auto& a : config_list(value)) e.alphas.push_back(config_double(key, a));
  } else if (key == "k") {
    cfg.k_values.clear();
    for (const auto& a : config_list(value)) cfg.k_values.push_back(config_uint(key, a));
    if (cfg.k_values.empty()) throw ConfigError("k: empty");
    e.k = cfg.k_values.front();
  } else if (key == "seed") {
    e.seed = config_uint(key, value);
  } else if (key == "methods") {
    e.methods.clear();
    for (const auto& m : config_list(value)) e.methods.push_back(parse_method(m));
  } else if (key == "ref_fraction") {
    e.ref_fraction = config_double(key, value);
  } else if (key == "trials") {
    e.trials = config_uint(key, value);
  } else if (key == "workers") {
    e.workers = config_uint(key, value);
  } else if (key == "n") {
    s.n = config_uint(key, value);
  } else if (key == "T") {
    s.num_test = config_uint(key, value);
  } else if (key == "L") {
    s.num_labels = config_uint(key, value);
  } else if (key == "d") {
    s.dim = config_uint(key, value);
  } else if (key == "sigma") {
    s.sigma = config_double(key, value);
  } else if (key == "rho") {
    s.rho = config_double(key, value);
  } else if (key == "tensor") {
    cfg.tensor = value;
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "format") {
    cfg.format = parse_format(value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

inline void parse_config_text(RunConfig& cfg, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_config_entry(cfg, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
  }
}

inline void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  parse_config_text(cfg, ss.str());
}

}  // namespace caos
