#pragma once

// Multiset machinery: score pools, one-occurrence removal, the sum of the k
// smallest scores, and the finite-sample conformal quantile.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "caos/error.hpp"

namespace caos {

// A finite multiset of scores. Order of insertion is irrelevant to every
// query; equality compares multisets.
class ScorePool {
 public:
  ScorePool() = default;
  ScorePool(std::initializer_list<double> values) : values_(values) {}
  explicit ScorePool(std::span<const double> values) : values_(values.begin(), values.end()) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }
  std::span<const double> values() const noexcept { return values_; }

  void insert(double x) { values_.push_back(x); }

  // Removes one occurrence of x if present, matched on the exact bit pattern.
  void remove_one(double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    auto it = std::find_if(values_.begin(), values_.end(),
                           [bits](double v) { return std::bit_cast<std::uint64_t>(v) == bits; });
    if (it != values_.end()) values_.erase(it);
  }

  std::size_t count(double x) const {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [bits](double v) {
      return std::bit_cast<std::uint64_t>(v) == bits;
    }));
  }

  friend bool operator==(const ScorePool& a, const ScorePool& b) {
    std::vector<double> x = a.values_, y = b.values_;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    return std::equal(x.begin(), x.end(), y.begin(), y.end(), [](double u, double v) {
      return std::bit_cast<std::uint64_t>(u) == std::bit_cast<std::uint64_t>(v);
    });
  }

 private:
  std::vector<double> values_;
};

inline ScorePool pool_remove_one(ScorePool a, double x) {
  a.remove_one(x);
  return a;
}

// Sum of an ascending run, left to right. Every aggregation path funnels
// through this so equal multisets give bit-identical sums.
inline double ascending_sum(std::span<const double> sorted_prefix) {
  double acc = 0.0;
  for (double v : sorted_prefix) acc += v;
  return acc;
}

// Sum of the k smallest values counting multiplicity, summed in ascending
// order. `scratch` is reordered.
inline double minsum_inplace(std::span<double> scratch, std::size_t k) {
  if (k < 1 || scratch.size() < k) {
    throw PreconditionError("minsum: pool of size " + std::to_string(scratch.size()) +
                            " is smaller than k = " + std::to_string(k));
  }
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
  return ascending_sum(scratch.first(k));
}

inline double minsum(std::span<const double> values, std::size_t k) {
  std::vector<double> scratch(values.begin(), values.end());
  return minsum_inplace(scratch, k);
}

inline double minsum(const ScorePool& pool, std::size_t k) { return minsum(pool.values(), k); }

// 1-based rank min{ceil(tau * m), m}. A product within a few ulps of an
// integer is snapped to it, so (1 - alpha)(1 + 1/m) * m lands on the exact
// integer when (1 - alpha)(m + 1) is one.
inline std::size_t conformal_rank(double tau, std::size_t m) {
  if (m == 0) throw PreconditionError("conformal quantile of an empty sequence");
  if (!(tau > 0.0)) throw PreconditionError("conformal quantile level must be positive");
  const double x = tau * static_cast<double>(m);
  const double nearest = std::round(x);
  const double snapped = std::abs(x - nearest) <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, x)
                             ? nearest
                             : x;
  const double r = std::ceil(snapped);
  if (r >= static_cast<double>(m)) return m;
  return std::max<std::size_t>(1, static_cast<std::size_t>(r));
}

// s_(min{ceil(tau |s|), |s|}) with s_(1) <= ... <= s_(|s|).
inline double conformal_quantile(std::span<const double> s, double tau) {
  if (s.empty()) throw PreconditionError("conformal quantile of an empty sequence");
  const std::size_t rank = conformal_rank(tau, s.size());
  std::vector<double> sorted(s.begin(), s.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  return sorted[rank - 1];
}

inline double conformal_level(double alpha, std::size_t m) {
  return (1.0 - alpha) * (1.0 + 1.0 / static_cast<double>(m));
}

}  // namespace caos
