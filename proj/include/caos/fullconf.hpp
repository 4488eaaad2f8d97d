#pragma once

// Full-conformal CAOS. Each hypothetical test label y augments every
// calibration pool with the score induced by (x_test, y) and gets its own
// threshold. It is expensive and serves mainly as a reference construction:
// its sets are always contained in the leave-one-out CAOS sets.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "caos/aggregate.hpp"
#include "caos/caos.hpp"
#include "caos/core.hpp"

namespace caos {

// The k smallest entries of every leave-one-out pool, ascending. Shared by
// all (test point, label) pairs of one tensor.
class LooPrefixes {
 public:
  LooPrefixes(const ScoreTensor& t, std::size_t k) : k_(k), n_(t.n()), prefix_(t.n() * k) {
    detail::require_loo_size(t.n(), k);
    for (std::size_t i = 0; i < n_; ++i) {
      auto pool = loo_pool(t, i);
      std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end());
      std::copy_n(pool.begin(), k, prefix_.begin() + static_cast<std::ptrdiff_t>(i * k));
    }
  }

  std::size_t k() const noexcept { return k_; }
  std::span<const double> row(std::size_t i) const { return {prefix_.data() + i * k_, k_}; }

  // Sum of the k smallest of (leave-one-out pool of i) plus {extra}.
  double augmented_minsum(std::size_t i, double extra) const {
    const auto r = row(i);
    double acc = 0.0;
    bool used = false;
    std::size_t taken = 0;
    for (std::size_t j = 0; taken < k_; ++taken) {
      if (!used && (j == k_ || extra < r[j])) {
        acc += extra;
        used = true;
      } else {
        acc += r[j++];
      }
    }
    return acc;
  }

  // Plain leave-one-out score, equal to caos_calibration_scores()[i].
  double loo_minsum(std::size_t i) const { return ascending_sum(row(i)); }

 private:
  std::size_t k_;
  std::size_t n_;
  std::vector<double> prefix_;
};

namespace detail {

inline void require_full(const ScoreTensor& t, std::size_t test_index, Label y) {
  if (!t.has_full()) throw PreconditionError("full CAOS needs the test-induced score block");
  require_test_index(t, test_index);
  if (y >= t.num_labels()) throw PreconditionError("candidate label out of range");
}

}  // namespace detail

inline std::vector<double> full_caos_calibration_scores(const LooPrefixes& loo, const ScoreTensor& t,
                                                        std::size_t test_index, Label y) {
  detail::require_full(t, test_index, y);
  const auto extra = t.full_row(test_index, y);
  std::vector<double> out(t.n());
  for (std::size_t i = 0; i < t.n(); ++i) out[i] = loo.augmented_minsum(i, extra[i]);
  return out;
}

inline std::vector<double> full_caos_calibration_scores(const ScoreTensor& t, std::size_t test_index,
                                                        Label y, std::size_t k) {
  detail::require_full(t, test_index, y);
  return full_caos_calibration_scores(LooPrefixes(t, k), t, test_index, y);
}

// Same scores, built literally: the whole row of P plus the test-induced
// score, with one occurrence of the self-score removed.
inline std::vector<double> full_caos_calibration_scores_by_removal(const ScoreTensor& t,
                                                                   std::size_t test_index, Label y,
                                                                   std::size_t k) {
  detail::require_full(t, test_index, y);
  detail::require_loo_size(t.n(), k);
  std::vector<double> out(t.n());
  for (std::size_t i = 0; i < t.n(); ++i) {
    ScorePool pool(t.p_row(i));
    pool.insert(t.full(test_index, y, i));
    out[i] = minsum(pool_remove_one(std::move(pool), t.p(i, i)), k);
  }
  return out;
}

struct FullCaosResult {
  PredictionSet set;
  std::vector<double> thresholds;  // one per candidate label
};

inline FullCaosResult full_caos_predict_detailed(const LooPrefixes& loo, const ScoreTensor& t,
                                                 std::size_t test_index, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0,1)");
  detail::require_full(t, test_index, 0);
  const double tau = conformal_level(alpha, t.n());
  FullCaosResult out;
  // The test score coincides with the CAOS test score: removing the
  // test pair's self-score from the augmented pool leaves the plain pool.
  out.set.label_scores = caos_test_scores(t, test_index, loo.k());
  out.thresholds.resize(t.num_labels());
  for (Label y = 0; y < t.num_labels(); ++y) {
    const auto scores = full_caos_calibration_scores(loo, t, test_index, y);
    out.thresholds[y] = conformal_quantile(scores, tau);
    if (out.set.label_scores[y] <= out.thresholds[y]) out.set.members.push_back(y);
  }
  out.set.threshold = *std::max_element(out.thresholds.begin(), out.thresholds.end());
  return out;
}

inline PredictionSet full_caos_predict(const ScoreTensor& t, std::size_t test_index, double alpha,
                                       std::size_t k) {
  detail::require_full(t, test_index, 0);
  return full_caos_predict_detailed(LooPrefixes(t, k), t, test_index, alpha).set;
}

}  // namespace caos
