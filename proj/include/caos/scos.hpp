#pragma once

// Split-conformal one-shot prediction and the baselines built on it:
// averaging over reference predictors, best-on-calibration selection, the
// hindsight oracle, and split variants of CAOS that reuse less data.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "caos/aggregate.hpp"
#include "caos/caos.hpp"
#include "caos/core.hpp"

namespace caos {

class SplitSpec {
 public:
  SplitSpec(std::vector<std::size_t> reference, std::vector<std::size_t> calibration, std::size_t n)
      : ref_(std::move(reference)), cal_(std::move(calibration)) {
    if (ref_.empty() || cal_.empty()) throw ConfigError("split: reference and calibration sets must be nonempty");
    std::vector<int> seen(n, 0);
    for (auto i : ref_) {
      if (i >= n) throw ConfigError("split: index out of range");
      ++seen[i];
    }
    for (auto i : cal_) {
      if (i >= n) throw ConfigError("split: index out of range");
      ++seen[i];
    }
    for (int c : seen)
      if (c != 1) throw ConfigError("split: reference and calibration sets must partition 0..n-1");
  }

  // First round(fraction * n) indices form the reference set.
  static SplitSpec leading(std::size_t n, double ref_fraction) {
    auto n_ref = static_cast<std::size_t>(std::llround(ref_fraction * static_cast<double>(n)));
    n_ref = std::clamp<std::size_t>(n_ref, 1, n > 1 ? n - 1 : 1);
    std::vector<std::size_t> ref, cal;
    for (std::size_t i = 0; i < n; ++i) (i < n_ref ? ref : cal).push_back(i);
    return SplitSpec(std::move(ref), std::move(cal), n);
  }

  const std::vector<std::size_t>& reference() const noexcept { return ref_; }
  const std::vector<std::size_t>& calibration() const noexcept { return cal_; }

  bool in_reference(std::size_t i) const {
    return std::find(ref_.begin(), ref_.end(), i) != ref_.end();
  }

 private:
  std::vector<std::size_t> ref_;
  std::vector<std::size_t> cal_;
};

inline CalibrationResult scos_calibrate(const ScoreTensor& t, const SplitSpec& split,
                                        std::size_t ref_id, double alpha) {
  if (!split.in_reference(ref_id))
    throw PreconditionError("reference " + std::to_string(ref_id) + " is not in the reference set");
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0,1)");
  CalibrationResult out;
  out.method = Method::kScosFixed;
  for (std::size_t j : split.calibration()) out.scores.push_back(t.p(j, ref_id));
  out.alpha = alpha;
  out.k = 1;
  out.n = out.scores.size();
  out.tau = conformal_level(alpha, out.n);
  out.threshold = conformal_quantile(out.scores, out.tau);
  return out;
}

inline PredictionSet scos_predict(const ScoreTensor& t, std::size_t test_index, std::size_t ref_id,
                                  const CalibrationResult& calib) {
  detail::require_test_index(t, test_index);
  if (ref_id >= t.n()) throw PreconditionError("reference index out of range");
  std::vector<double> scores(t.num_labels());
  for (Label y = 0; y < t.num_labels(); ++y) scores[y] = t.test(test_index, ref_id, y);
  return threshold_set(std::move(scores), calib.threshold);
}

struct MetricAccumulator {
  double covered = 0.0;
  double size = 0.0;
  std::size_t count = 0;
  double coverage() const { return count ? covered / static_cast<double>(count) : 0.0; }
  double mean_size() const { return count ? size / static_cast<double>(count) : 0.0; }
};

// Split conformal with every reference predictor, averaged over
// (reference, test point) pairs.
struct ScosAverage {
  MetricAccumulator total;
  std::vector<double> covered_per_test;  // fraction of references covering test point t
  std::vector<double> size_per_test;     // mean set size over references at test point t
  std::vector<double> threshold_per_test;
};

inline ScosAverage scos_average_report(const ScoreTensor& t, const SplitSpec& split, double alpha) {
  if (!t.has_truth()) throw PreconditionError("SCOS averaging needs truth labels");
  const auto& truth = t.truth();
  const auto& refs = split.reference();
  std::vector<CalibrationResult> calibs;
  for (std::size_t r : refs) calibs.push_back(scos_calibrate(t, split, r, alpha));
  ScosAverage out;
  out.covered_per_test.assign(t.num_test(), 0.0);
  out.size_per_test.assign(t.num_test(), 0.0);
  out.threshold_per_test.assign(t.num_test(), 0.0);
  const double m = static_cast<double>(refs.size());
  for (std::size_t test = 0; test < t.num_test(); ++test) {
    double cov = 0.0, size = 0.0, thr = 0.0;
    for (std::size_t a = 0; a < refs.size(); ++a) {
      const auto set = scos_predict(t, test, refs[a], calibs[a]);
      cov += set.contains(truth[test]) ? 1.0 : 0.0;
      size += static_cast<double>(set.size());
      thr += calibs[a].threshold;
    }
    out.total.covered += cov;
    out.total.size += size;
    out.total.count += refs.size();
    out.covered_per_test[test] = cov / m;
    out.size_per_test[test] = size / m;
    out.threshold_per_test[test] = thr / m;
  }
  return out;
}

// Average set size of each reference predictor on the calibration inputs,
// using the threshold fitted on the full calibration set. Needs the
// calibration-by-label block.
inline std::vector<double> scos_calibration_set_sizes(const ScoreTensor& t, const SplitSpec& split,
                                                      double alpha) {
  if (!t.has_calib())
    throw PreconditionError("SCOS best selection needs the calibration-by-label score block");
  std::vector<double> sizes;
  for (std::size_t r : split.reference()) {
    const double q = scos_calibrate(t, split, r, alpha).threshold;
    std::size_t total = 0;
    for (std::size_t j : split.calibration())
      for (Label y = 0; y < t.num_labels(); ++y) total += t.calib(j, r, y) <= q ? 1 : 0;
    sizes.push_back(static_cast<double>(total) / static_cast<double>(split.calibration().size()));
  }
  return sizes;
}

// Reference whose calibrated sets are smallest on the calibration data.
// Ties go to the smallest index. Selection is not accounted for, so the
// resulting sets carry no coverage guarantee.
inline std::size_t scos_best_select(const ScoreTensor& t, const SplitSpec& split, double alpha) {
  const auto sizes = scos_calibration_set_sizes(t, split, alpha);
  std::size_t best = 0;
  for (std::size_t a = 1; a < sizes.size(); ++a) {
    const bool smaller = sizes[a] < sizes[best];
    const bool tie_lower = sizes[a] == sizes[best] && split.reference()[a] < split.reference()[best];
    if (smaller || tie_lower) best = a;
  }
  return split.reference()[best];
}

struct OracleChoice {
  PredictionSet set;
  std::size_t ref_id = 0;
  bool contains_truth = true;  // false when no reference covered the truth
};

// Hindsight oracle: the smallest single-reference set that contains the
// true label.
inline OracleChoice scos_oracle_predict(const ScoreTensor& t, const SplitSpec& split, double alpha,
                                        std::size_t test_index, Label true_label) {
  std::optional<OracleChoice> best_covering, best_any;
  auto better = [](const std::optional<OracleChoice>& cur, const PredictionSet& s, std::size_t r) {
    return !cur || s.size() < cur->set.size() || (s.size() == cur->set.size() && r < cur->ref_id);
  };
  for (std::size_t r : split.reference()) {
    auto set = scos_predict(t, test_index, r, scos_calibrate(t, split, r, alpha));
    if (set.contains(true_label) && better(best_covering, set, r)) best_covering = OracleChoice{set, r, true};
    if (better(best_any, set, r)) best_any = OracleChoice{std::move(set), r, false};
  }
  return best_covering ? *best_covering : *best_any;
}

// CAOS with an explicit calibration set and reference pool. A calibration
// example that is also a reference never scores itself.
struct SplitCaosResult {
  CalibrationResult calibration;
  std::vector<PredictionSet> sets;  // one per test point
};

inline SplitCaosResult split_caos(const ScoreTensor& t, const std::vector<std::size_t>& calib_idx,
                                  const std::vector<std::size_t>& ref_idx, double alpha, std::size_t k) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0,1)");
  if (calib_idx.empty()) throw PreconditionError("split CAOS needs a nonempty calibration set");
  if (k < 1 || ref_idx.size() < k)
    throw PreconditionError("reference pool of size " + std::to_string(ref_idx.size()) +
                            " is smaller than k = " + std::to_string(k));
  SplitCaosResult out;
  auto& c = out.calibration;
  c.alpha = alpha;
  c.k = k;
  c.n = calib_idx.size();
  std::vector<double> pool;
  for (std::size_t i : calib_idx) {
    pool.clear();
    for (std::size_t j : ref_idx)
      if (j != i) pool.push_back(t.p(i, j));
    if (pool.size() < k)
      throw PreconditionError("calibration pool of example " + std::to_string(i) +
                              " is smaller than k = " + std::to_string(k));
    c.scores.push_back(minsum_inplace(pool, k));
  }
  c.tau = conformal_level(alpha, c.n);
  c.threshold = conformal_quantile(c.scores, c.tau);
  for (std::size_t test = 0; test < t.num_test(); ++test) {
    std::vector<double> scores(t.num_labels());
    for (Label y = 0; y < t.num_labels(); ++y) {
      pool.clear();
      for (std::size_t j : ref_idx) pool.push_back(t.test(test, j, y));
      scores[y] = minsum_inplace(pool, k);
    }
    out.sets.push_back(threshold_set(std::move(scores), c.threshold));
  }
  return out;
}

enum class SplitVariant {
  kRefAndCal,  // calibrate on D_cal, references D_ref
  kCalOnly,    // calibrate on D_cal, references D_n
  kRefOnly,    // calibrate on D_n, references D_ref
};

inline SplitCaosResult split_caos_variant(const ScoreTensor& t, const SplitSpec& split, double alpha,
                                          std::size_t k, SplitVariant variant) {
  std::vector<std::size_t> all(t.n());
  for (std::size_t i = 0; i < t.n(); ++i) all[i] = i;
  SplitCaosResult out;
  switch (variant) {
    case SplitVariant::kRefAndCal:
      out = split_caos(t, split.calibration(), split.reference(), alpha, k);
      out.calibration.method = Method::kSplitCaosRefCal;
      break;
    case SplitVariant::kCalOnly:
      out = split_caos(t, split.calibration(), all, alpha, k);
      out.calibration.method = Method::kSplitCaosCal;
      break;
    case SplitVariant::kRefOnly:
      out = split_caos(t, all, split.reference(), alpha, k);
      out.calibration.method = Method::kSplitCaosRef;
      break;
  }
  return out;
}

}  // namespace caos
