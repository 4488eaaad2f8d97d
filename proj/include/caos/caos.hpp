#pragma once

// Conformal aggregation of one-shot predictors with leave-one-out
// calibration.

#include <cstddef>
#include <string>
#include <vector>

#include "caos/aggregate.hpp"
#include "caos/core.hpp"

namespace caos {

struct CalibrationResult {
  Method method = Method::kCaos;
  std::vector<double> scores;
  double tau = 0.0;
  double threshold = 0.0;
  double alpha = 0.0;
  std::size_t k = 0;
  std::size_t n = 0;
};

struct PredictionSet {
  std::vector<Label> members;
  std::vector<double> label_scores;  // one per label
  double threshold = 0.0;

  std::size_t size() const noexcept { return members.size(); }
  bool contains(Label y) const {
    for (Label m : members)
      if (m == y) return true;
    return false;
  }
  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

// Members are the labels whose score is <= threshold (ties included).
inline PredictionSet threshold_set(std::vector<double> label_scores, double threshold) {
  PredictionSet out;
  out.threshold = threshold;
  for (Label y = 0; y < label_scores.size(); ++y)
    if (label_scores[y] <= threshold) out.members.push_back(y);
  out.label_scores = std::move(label_scores);
  return out;
}

namespace detail {

inline void require_loo_size(std::size_t n, std::size_t k) {
  if (k < 1) throw PreconditionError("k must be a positive integer");
  if (n <= k)
    throw PreconditionError("leave-one-out pools need n >= k+1 (n = " + std::to_string(n) +
                            ", k = " + std::to_string(k) + ")");
}

inline void require_test_index(const ScoreTensor& t, std::size_t test_index) {
  if (test_index >= t.num_test())
    throw PreconditionError("test index " + std::to_string(test_index) + " out of range (T = " +
                            std::to_string(t.num_test()) + ")");
}

}  // namespace detail

// Leave-one-out calibration pool of example i: row i of P without the
// diagonal entry.
inline std::vector<double> loo_pool(const ScoreTensor& t, std::size_t i) {
  std::vector<double> pool;
  pool.reserve(t.n() - 1);
  const auto row = t.p_row(i);
  for (std::size_t j = 0; j < row.size(); ++j)
    if (j != i) pool.push_back(row[j]);
  return pool;
}

inline std::vector<double> caos_calibration_scores(const ScoreTensor& t, std::size_t k) {
  detail::require_loo_size(t.n(), k);
  std::vector<double> scores(t.n());
  for (std::size_t i = 0; i < t.n(); ++i) {
    auto pool = loo_pool(t, i);
    scores[i] = minsum_inplace(pool, k);
  }
  return scores;
}

inline CalibrationResult caos_calibrate(const ScoreTensor& t, double alpha, std::size_t k) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0,1)");
  CalibrationResult out;
  out.method = Method::kCaos;
  out.scores = caos_calibration_scores(t, k);
  out.alpha = alpha;
  out.k = k;
  out.n = t.n();
  out.tau = conformal_level(alpha, t.n());
  out.threshold = conformal_quantile(out.scores, out.tau);
  return out;
}

// Aggregated test score of every candidate label against the full reference
// pool.
inline std::vector<double> caos_test_scores(const ScoreTensor& t, std::size_t test_index,
                                            std::size_t k) {
  detail::require_test_index(t, test_index);
  if (k < 1 || k > t.n())
    throw PreconditionError("k = " + std::to_string(k) + " exceeds reference pool size " +
                            std::to_string(t.n()));
  std::vector<double> scores(t.num_labels());
  std::vector<double> pool(t.n());
  for (Label y = 0; y < t.num_labels(); ++y) {
    for (std::size_t j = 0; j < t.n(); ++j) pool[j] = t.test(test_index, j, y);
    scores[y] = minsum_inplace(pool, k);
  }
  return scores;
}

inline PredictionSet caos_predict(const ScoreTensor& t, std::size_t test_index,
                                  const CalibrationResult& calib) {
  return threshold_set(caos_test_scores(t, test_index, calib.k), calib.threshold);
}

}  // namespace caos
