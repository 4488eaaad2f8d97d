#pragma once

// Score-tensor packages on disk.
//
//   manifest.json  {format_version: 1, n, T, L, has_full, has_truth,
//                   has_calib?, label_names?}
//   P.csv          n rows of n scores; row i is target example i
//   test.csv       T*n rows: t, j, then L scores
//   full.csv       T*L rows: t, y, then n scores       (has_full)
//   truth.csv      T rows: t, label                    (has_truth)
//   calib.csv      n*n rows: i, j, then L scores       (has_calib)
//
// Numbers are written in the shortest form that parses back to the same
// double, with '.' as decimal separator regardless of locale.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "caos/core.hpp"
#include "caos/error.hpp"

namespace caos {

inline constexpr int kTensorFormatVersion = 1;

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    fields.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::string where(std::string_view block, std::size_t row, std::size_t col) {
  return "block " + std::string(block) + " row " + std::to_string(row) + " column " + std::to_string(col);
}

inline double parse_score(std::string_view field, std::string_view block, std::size_t row, std::size_t col) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    // from_chars rejects the textual infinities and NaNs some writers emit;
    // report those as non-finite rather than malformed.
    std::string lower(field);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower.find("nan") != std::string::npos || lower.find("inf") != std::string::npos)
      throw DataError("non-finite value in " + where(block, row, col));
    throw DataError("malformed number '" + std::string(field) + "' in " + where(block, row, col));
  }
  if (!std::isfinite(v)) throw DataError("non-finite value in " + where(block, row, col));
  return v;
}

inline std::size_t parse_index(std::string_view field, std::string_view block, std::size_t row, std::size_t col) {
  std::size_t v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw DataError("malformed index '" + std::string(field) + "' in " + where(block, row, col));
  return v;
}

inline void expect_rows(std::string_view block, std::size_t got, std::size_t want) {
  if (got != want)
    throw DataError("dimension mismatch in block " + std::string(block) + ": expected " + std::to_string(want) +
                    " rows, found " + std::to_string(got));
}

inline void expect_cols(std::string_view block, std::size_t row, std::size_t got, std::size_t want) {
  if (got != want)
    throw DataError("dimension mismatch in block " + std::string(block) + " row " + std::to_string(row) +
                    ": expected " + std::to_string(want) + " columns, found " + std::to_string(got));
}

inline void expect_index(std::string_view block, std::size_t row, std::size_t col, std::size_t got,
                         std::size_t want) {
  if (got != want)
    throw DataError("unexpected index " + std::to_string(got) + " (wanted " + std::to_string(want) + ") in " +
                    where(block, row, col));
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed for " + path.string());
}

inline std::size_t manifest_size(const nlohmann::json& m, const char* key) {
  if (!m.contains(key) || !m[key].is_number_unsigned())
    throw DataError(std::string("manifest: field '") + key + "' must be a nonnegative integer");
  return m[key].get<std::size_t>();
}

inline bool manifest_flag(const nlohmann::json& m, const char* key, bool required) {
  if (!m.contains(key)) {
    if (required) throw DataError(std::string("manifest: missing field '") + key + "'");
    return false;
  }
  if (!m[key].is_boolean()) throw DataError(std::string("manifest: field '") + key + "' must be boolean");
  return m[key].get<bool>();
}

}  // namespace detail

inline void save_score_tensor(const ScoreTensor& t, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw DataError("cannot create directory " + dir.string());

  nlohmann::ordered_json m;
  m["format_version"] = kTensorFormatVersion;
  m["n"] = t.n();
  m["T"] = t.num_test();
  m["L"] = t.num_labels();
  m["has_full"] = t.has_full();
  m["has_truth"] = t.has_truth();
  m["has_calib"] = t.has_calib();
  if (!t.label_names().empty()) m["label_names"] = t.label_names();
  detail::write_file(dir / "manifest.json", m.dump(2) + "\n");

  std::string s;
  for (std::size_t i = 0; i < t.n(); ++i) {
    for (std::size_t j = 0; j < t.n(); ++j) {
      if (j) s += ',';
      detail::append_double(s, t.p(i, j));
    }
    s += '\n';
  }
  detail::write_file(dir / "P.csv", s);

  s.clear();
  for (std::size_t r = 0; r < t.num_test(); ++r)
    for (std::size_t j = 0; j < t.n(); ++j) {
      s += std::to_string(r) + ',' + std::to_string(j);
      for (Label y = 0; y < t.num_labels(); ++y) {
        s += ',';
        detail::append_double(s, t.test(r, j, y));
      }
      s += '\n';
    }
  detail::write_file(dir / "test.csv", s);

  if (t.has_full()) {
    s.clear();
    for (std::size_t r = 0; r < t.num_test(); ++r)
      for (Label y = 0; y < t.num_labels(); ++y) {
        s += std::to_string(r) + ',' + std::to_string(y);
        for (std::size_t i = 0; i < t.n(); ++i) {
          s += ',';
          detail::append_double(s, t.full(r, y, i));
        }
        s += '\n';
      }
    detail::write_file(dir / "full.csv", s);
  }
  if (t.has_truth()) {
    s.clear();
    for (std::size_t r = 0; r < t.num_test(); ++r) s += std::to_string(r) + ',' + std::to_string(t.truth()[r]) + '\n';
    detail::write_file(dir / "truth.csv", s);
  }
  if (t.has_calib()) {
    s.clear();
    for (std::size_t i = 0; i < t.n(); ++i)
      for (std::size_t j = 0; j < t.n(); ++j) {
        s += std::to_string(i) + ',' + std::to_string(j);
        for (Label y = 0; y < t.num_labels(); ++y) {
          s += ',';
          detail::append_double(s, t.calib(i, j, y));
        }
        s += '\n';
      }
    detail::write_file(dir / "calib.csv", s);
  }
}

inline ScoreTensor load_score_tensor(const std::filesystem::path& dir) {
  using namespace detail;
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw DataError("missing file " + manifest_path.string());
  nlohmann::json m;
  {
    std::ifstream in(manifest_path);
    try {
      m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest: " + std::string(e.what()));
    }
  }
  if (!m.is_object()) throw DataError("manifest: expected a JSON object");
  if (!m.contains("format_version") || m["format_version"] != kTensorFormatVersion)
    throw DataError("manifest: unsupported format_version (expected " + std::to_string(kTensorFormatVersion) + ")");
  const std::size_t n = manifest_size(m, "n");
  const std::size_t T = manifest_size(m, "T");
  const std::size_t L = manifest_size(m, "L");
  if (L == 0) throw DataError("manifest: L must be at least 1");
  const bool has_full = manifest_flag(m, "has_full", true);
  const bool has_truth = manifest_flag(m, "has_truth", true);
  const bool has_calib = manifest_flag(m, "has_calib", false);

  ScoreTensor t(n, T, L, has_full, has_calib);

  auto lines = read_lines(dir / "P.csv");
  expect_rows("P", lines.size(), n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = split_fields(lines[i]);
    expect_cols("P", i, f.size(), n);
    for (std::size_t j = 0; j < n; ++j) t.p(i, j) = parse_score(f[j], "P", i, j);
  }

  lines = read_lines(dir / "test.csv");
  expect_rows("test", lines.size(), T * n);
  for (std::size_t row = 0; row < lines.size(); ++row) {
    const auto f = split_fields(lines[row]);
    expect_cols("test", row, f.size(), 2 + L);
    const std::size_t r = row / std::max<std::size_t>(n, 1), j = row % std::max<std::size_t>(n, 1);
    expect_index("test", row, 0, parse_index(f[0], "test", row, 0), r);
    expect_index("test", row, 1, parse_index(f[1], "test", row, 1), j);
    for (Label y = 0; y < L; ++y) t.test(r, j, y) = parse_score(f[2 + y], "test", row, 2 + y);
  }

  if (has_full) {
    lines = read_lines(dir / "full.csv");
    expect_rows("full", lines.size(), T * L);
    for (std::size_t row = 0; row < lines.size(); ++row) {
      const auto f = split_fields(lines[row]);
      expect_cols("full", row, f.size(), 2 + n);
      const std::size_t r = row / L, y = row % L;
      expect_index("full", row, 0, parse_index(f[0], "full", row, 0), r);
      expect_index("full", row, 1, parse_index(f[1], "full", row, 1), y);
      for (std::size_t i = 0; i < n; ++i) t.full(r, y, i) = parse_score(f[2 + i], "full", row, 2 + i);
    }
  }

  if (has_truth) {
    lines = read_lines(dir / "truth.csv");
    expect_rows("truth", lines.size(), T);
    std::vector<Label> truth(T);
    for (std::size_t row = 0; row < T; ++row) {
      const auto f = split_fields(lines[row]);
      expect_cols("truth", row, f.size(), 2);
      expect_index("truth", row, 0, parse_index(f[0], "truth", row, 0), row);
      truth[row] = parse_index(f[1], "truth", row, 1);
      if (truth[row] >= L) throw DataError("label out of range in " + where("truth", row, 1));
    }
    t.set_truth(std::move(truth));
  }

  if (has_calib) {
    lines = read_lines(dir / "calib.csv");
    expect_rows("calib", lines.size(), n * n);
    for (std::size_t row = 0; row < lines.size(); ++row) {
      const auto f = split_fields(lines[row]);
      expect_cols("calib", row, f.size(), 2 + L);
      const std::size_t i = row / n, j = row % n;
      expect_index("calib", row, 0, parse_index(f[0], "calib", row, 0), i);
      expect_index("calib", row, 1, parse_index(f[1], "calib", row, 1), j);
      for (Label y = 0; y < L; ++y) t.calib(i, j, y) = parse_score(f[2 + y], "calib", row, 2 + y);
    }
  }

  if (m.contains("label_names")) {
    try {
      t.set_label_names(m["label_names"].get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception&) {
      throw DataError("manifest: label_names must be an array of strings");
    }
  }
  return t;
}

}  // namespace caos
