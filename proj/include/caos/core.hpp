#pragma once

// Domain types shared by every method: label spaces, the score-provider
// contract and the precomputed score tensor the conformal routines consume.

#include <cmath>
#include <cstddef>
#include <concepts>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "caos/error.hpp"

namespace caos {

using Label = std::size_t;

class LabelSpace {
 public:
  explicit LabelSpace(std::size_t size) : size_(size) {
    if (size_ == 0) throw ConfigError("label space must contain at least one label");
  }

  explicit LabelSpace(std::vector<std::string> names)
      : size_(names.size()), names_(std::move(names)) {
    if (size_ == 0) throw ConfigError("label space must contain at least one label");
    std::set<std::string> seen(names_.begin(), names_.end());
    if (seen.size() != names_.size()) throw ConfigError("label names must be unique");
  }

  std::size_t size() const noexcept { return size_; }
  bool has_names() const noexcept { return !names_.empty(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::string name(Label y) const {
    return has_names() ? names_.at(y) : std::to_string(y);
  }

 private:
  std::size_t size_;
  std::vector<std::string> names_;
};

struct ExampleRef {
  std::size_t index = 0;
  Label label = 0;
};

// A labeled example as seen by a provider: an input plus its label.
template <typename Input>
struct Labeled {
  Input input;
  Label label = 0;
};

// A one-shot nonconformity score. score(reference, target_input, candidate)
// is the score that the predictor induced by `reference` assigns to the pair
// (target_input, candidate). Smaller means more conforming. Implementations
// must be deterministic, finite, and depend only on their arguments.
template <typename P>
concept ScoreProvider = requires(const P& p, const Labeled<typename P::input_type>& ref,
                                 const typename P::input_type& x, Label y) {
  typename P::input_type;
  { p.score(ref, x, y) } -> std::convertible_to<double>;
  { p.num_labels() } -> std::convertible_to<std::size_t>;
};

// All one-shot scores needed by CAOS, split conformal and full CAOS.
//
//   P[i][j]        score of calibration pair i under the predictor induced by j
//   test[t][j][y]  score of (test input t, candidate y) under predictor j
//   full[t][y][i]  score of calibration pair i under the predictor induced by
//                  the hypothetical pair (test input t, y)
//   calib[i][j][y] score of (calibration input i, candidate y) under predictor j
//
// `full`, `calib` and `truth` are optional blocks.
class ScoreTensor {
 public:
  ScoreTensor() = default;

  ScoreTensor(std::size_t n, std::size_t num_test, std::size_t num_labels, bool with_full = false,
              bool with_calib = false)
      : n_(n), t_(num_test), l_(num_labels), p_(n * n, 0.0), test_(num_test * n * num_labels, 0.0) {
    if (num_labels == 0) throw DataError("score tensor needs L >= 1");
    if (with_full) full_.emplace(num_test * num_labels * n, 0.0);
    if (with_calib) calib_.emplace(n * n * num_labels, 0.0);
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t num_test() const noexcept { return t_; }
  std::size_t num_labels() const noexcept { return l_; }
  bool has_full() const noexcept { return full_.has_value(); }
  bool has_calib() const noexcept { return calib_.has_value(); }
  bool has_truth() const noexcept { return truth_.has_value(); }

  double& p(std::size_t i, std::size_t j) { return p_[i * n_ + j]; }
  double p(std::size_t i, std::size_t j) const { return p_[i * n_ + j]; }
  std::span<const double> p_row(std::size_t i) const { return {p_.data() + i * n_, n_}; }

  double& test(std::size_t t, std::size_t j, Label y) { return test_[(t * n_ + j) * l_ + y]; }
  double test(std::size_t t, std::size_t j, Label y) const { return test_[(t * n_ + j) * l_ + y]; }

  double& full(std::size_t t, Label y, std::size_t i) { return (*full_)[(t * l_ + y) * n_ + i]; }
  double full(std::size_t t, Label y, std::size_t i) const { return (*full_)[(t * l_ + y) * n_ + i]; }
  std::span<const double> full_row(std::size_t t, Label y) const {
    return {full_->data() + (t * l_ + y) * n_, n_};
  }

  double& calib(std::size_t i, std::size_t j, Label y) { return (*calib_)[(i * n_ + j) * l_ + y]; }
  double calib(std::size_t i, std::size_t j, Label y) const {
    return (*calib_)[(i * n_ + j) * l_ + y];
  }

  const std::vector<Label>& truth() const { return truth_.value(); }
  void set_truth(std::vector<Label> truth) {
    if (truth.size() != t_) throw DataError("truth block must have T entries");
    for (Label y : truth)
      if (y >= l_) throw DataError("truth label " + std::to_string(y) + " outside label space");
    truth_ = std::move(truth);
  }

  const std::vector<std::string>& label_names() const noexcept { return label_names_; }
  void set_label_names(std::vector<std::string> names) {
    if (!names.empty()) {
      LabelSpace check(names);
      if (check.size() != l_) throw DataError("label_names must have L entries");
    }
    label_names_ = std::move(names);
  }

  // Raw blocks, row-major in the index order documented above.
  std::span<const double> p_block() const noexcept { return p_; }
  std::span<const double> test_block() const noexcept { return test_; }
  std::span<const double> full_block() const noexcept {
    return full_ ? std::span<const double>(*full_) : std::span<const double>();
  }
  std::span<const double> calib_block() const noexcept {
    return calib_ ? std::span<const double>(*calib_) : std::span<const double>();
  }

  // Throws DataError naming the first non-finite entry.
  void validate() const {
    check_block("P", p_, {n_, n_});
    check_block("test", test_, {t_, n_, l_});
    if (full_) check_block("full", *full_, {t_, l_, n_});
    if (calib_) check_block("calib", *calib_, {n_, n_, l_});
  }

  friend bool operator==(const ScoreTensor&, const ScoreTensor&) = default;

 private:
  static void check_block(const char* name, std::span<const double> data,
                          std::vector<std::size_t> dims) {
    for (std::size_t flat = 0; flat < data.size(); ++flat) {
      if (std::isfinite(data[flat])) continue;
      std::string where;
      std::size_t rem = flat;
      std::vector<std::size_t> idx(dims.size());
      for (std::size_t d = dims.size(); d-- > 0;) {
        idx[d] = rem % dims[d];
        rem /= dims[d];
      }
      for (std::size_t d = 0; d < idx.size(); ++d) where += (d ? "," : "") + std::to_string(idx[d]);
      throw DataError(std::string("non-finite value in block ") + name + " at [" + where + "]");
    }
  }

  std::size_t n_ = 0;
  std::size_t t_ = 0;
  std::size_t l_ = 1;
  std::vector<double> p_;
  std::vector<double> test_;
  std::optional<std::vector<double>> full_;
  std::optional<std::vector<double>> calib_;
  std::optional<std::vector<Label>> truth_;
  std::vector<std::string> label_names_;
};

namespace detail {

inline double checked_score(double s, const char* block, std::size_t a, std::size_t b,
                            std::size_t c) {
  if (!std::isfinite(s)) {
    throw DataError(std::string("provider returned non-finite score for block ") + block + " at [" +
                    std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(c) + "]");
  }
  return s;
}

}  // namespace detail

// Evaluates the provider on every pair the conformal routines need.
template <ScoreProvider Provider>
ScoreTensor materialize(const Provider& provider,
                        std::span<const Labeled<typename Provider::input_type>> calib,
                        std::span<const typename Provider::input_type> test_inputs,
                        bool with_full, bool with_calib = false) {
  const std::size_t n = calib.size();
  const std::size_t num_test = test_inputs.size();
  const std::size_t num_labels = provider.num_labels();
  if (n < 2) throw PreconditionError("materialize needs at least two calibration examples");
  ScoreTensor out(n, num_test, num_labels, with_full, with_calib);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.p(i, j) = detail::checked_score(provider.score(calib[j], calib[i].input, calib[i].label),
                                          "P", i, j, 0);
  for (std::size_t t = 0; t < num_test; ++t)
    for (std::size_t j = 0; j < n; ++j)
      for (Label y = 0; y < num_labels; ++y)
        out.test(t, j, y) =
            detail::checked_score(provider.score(calib[j], test_inputs[t], y), "test", t, j, y);
  if (with_full) {
    for (std::size_t t = 0; t < num_test; ++t)
      for (Label y = 0; y < num_labels; ++y) {
        const Labeled<typename Provider::input_type> hypothetical{test_inputs[t], y};
        for (std::size_t i = 0; i < n; ++i)
          out.full(t, y, i) = detail::checked_score(
              provider.score(hypothetical, calib[i].input, calib[i].label), "full", t, y, i);
      }
  }
  if (with_calib) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (Label y = 0; y < num_labels; ++y)
          out.calib(i, j, y) =
              detail::checked_score(provider.score(calib[j], calib[i].input, y), "calib", i, j, y);
  }
  return out;
}

enum class Method {
  kCaos,
  kFullCaos,
  kScos,         // split conformal, averaged over every reference predictor
  kScosFixed,    // split conformal with the first reference predictor only
  kScosBest,
  kScosOracle,
  kSplitCaosRefCal,
  kSplitCaosCal,
  kSplitCaosRef,
};

struct ExperimentConfig {
  std::vector<double> alphas{0.1};
  std::size_t k = 3;
  std::uint64_t seed = 0;
  std::vector<Method> methods{Method::kCaos, Method::kScos};
  double ref_fraction = 0.5;  // |D_ref| / n for split baselines
  std::size_t trials = 1;
  std::size_t workers = 1;

  // Throws ConfigError with a field-level message. `n` is the calibration
  // size the config will be applied to (0 skips the size checks).
  void validate(std::size_t n = 0) const {
    if (alphas.empty()) throw ConfigError("alpha: at least one level required");
    for (double a : alphas)
      if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha: must lie in (0,1), got " + std::to_string(a));
    if (k < 1) throw ConfigError("k: must be a positive integer");
    if (!(ref_fraction > 0.0 && ref_fraction < 1.0))
      throw ConfigError("ref_fraction: must lie in (0,1)");
    if (trials < 1) throw ConfigError("trials: must be at least 1");
    if (workers < 1) throw ConfigError("workers: must be at least 1");
    if (n != 0 && k > n - 1)
      throw ConfigError("k: must be at most n-1 = " + std::to_string(n - 1) + ", got " +
                        std::to_string(k));
  }
};

}  // namespace caos
