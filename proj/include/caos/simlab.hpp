#pragma once

// Synthetic exchangeable tasks, literal reference implementations of the
// CAOS and full-CAOS procedures, and the Monte Carlo coverage harness.
//
// Task model. Each trial draws L label prototypes c_y ~ N(0, I_d). Every
// example (calibration or test) is drawn i.i.d.: label uniform on 0..L-1,
// input x = c_label + sigma * N(0, I_d), and a reference quality
// q ~ U[1 - rho, 1 + rho]. The one-shot score of target (x, y) under the
// predictor induced by reference (x_r, y_r, q_r) is
//
//   q_r * (1 - cos(phi(x, y), phi(x_r, y_r)))
//
// with phi(x, y) = [x, sqrt(d) * e_y] and e_y the y-th unit vector. Scores lie
// in [0, 2 (1 + rho)], so no shift is needed for rho <= 1.
//
// Trial seeds. Trial r of a run with master seed s uses
//   splitmix64(s + 0x9E3779B97F4A7C15 * (r + 1))
// where splitmix64 is the finalizer of Steele et al.'s SplitMix64 generator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "caos/caos.hpp"
#include "caos/core.hpp"
#include "caos/methods.hpp"
#include "caos/parallel.hpp"

namespace caos {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
  return splitmix64(master + 0x9E3779B97F4A7C15ULL * (trial + 1));
}

struct SyntheticTaskSpec {
  std::size_t n = 30;
  std::size_t num_test = 1;
  std::size_t num_labels = 8;
  std::size_t dim = 8;
  double sigma = 1.0;
  double rho = 0.5;
  std::uint64_t seed = 0;
  bool with_full = true;
  bool with_calib = true;

  void validate() const {
    if (n < 2) throw ConfigError("n: must be at least 2");
    if (num_labels < 1) throw ConfigError("L: must be at least 1");
    if (dim < 1) throw ConfigError("d: must be at least 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma: must be positive");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho: must lie in [0,1]");
  }
};

struct SyntheticInput {
  std::vector<double> x;
  double quality = 1.0;
};

class SyntheticProvider {
 public:
  using input_type = SyntheticInput;

  SyntheticProvider(std::size_t num_labels, std::size_t dim)
      : num_labels_(num_labels), label_scale_(std::sqrt(static_cast<double>(dim))) {}

  std::size_t num_labels() const noexcept { return num_labels_; }

  double score(const Labeled<SyntheticInput>& ref, const SyntheticInput& target, Label y) const {
    const auto& a = target.x;
    const auto& b = ref.input.x;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    const double l2 = label_scale_ * label_scale_;
    if (y == ref.label) dot += l2;
    na += l2;
    nb += l2;
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): identical vectors then
    // give a cosine of exactly 1 and a score of exactly 0.
    const double cosine = dot / std::sqrt(na * nb);
    return ref.input.quality * (1.0 - cosine);
  }

 private:
  std::size_t num_labels_;
  double label_scale_;
};

struct SyntheticTask {
  std::vector<Labeled<SyntheticInput>> calibration;
  std::vector<Labeled<SyntheticInput>> test;
  ScoreTensor tensor;
};

inline SyntheticTask generate_task_with_examples(const SyntheticTaskSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_label(0, spec.num_labels - 1);
  std::uniform_real_distribution<double> pick_quality(1.0 - spec.rho, 1.0 + spec.rho);

  std::vector<std::vector<double>> prototypes(spec.num_labels, std::vector<double>(spec.dim));
  for (auto& c : prototypes)
    for (auto& v : c) v = gauss(rng);

  auto draw = [&] {
    Labeled<SyntheticInput> e;
    e.label = pick_label(rng);
    e.input.x.resize(spec.dim);
    for (std::size_t i = 0; i < spec.dim; ++i) e.input.x[i] = prototypes[e.label][i] + spec.sigma * gauss(rng);
    e.input.quality = spec.rho > 0.0 ? pick_quality(rng) : 1.0;
    return e;
  };

  SyntheticTask task;
  for (std::size_t i = 0; i < spec.n; ++i) task.calibration.push_back(draw());
  for (std::size_t i = 0; i < spec.num_test; ++i) task.test.push_back(draw());

  std::vector<SyntheticInput> test_inputs;
  std::vector<Label> truth;
  for (const auto& e : task.test) {
    test_inputs.push_back(e.input);
    truth.push_back(e.label);
  }
  const SyntheticProvider provider(spec.num_labels, spec.dim);
  task.tensor = materialize(provider, std::span<const Labeled<SyntheticInput>>(task.calibration),
                            std::span<const SyntheticInput>(test_inputs), spec.with_full, spec.with_calib);
  task.tensor.set_truth(std::move(truth));
  return task;
}

inline ScoreTensor generate_task(const SyntheticTaskSpec& spec) {
  return generate_task_with_examples(spec).tensor;
}

// ---------------------------------------------------------------------------
// Literal reference implementations. These deliberately avoid the optimized
// code paths: pools are rebuilt element by element and fully sorted, and the
// quantile rank is computed in exact integer arithmetic from alpha expressed
// in millionths (alpha must be a multiple of 1e-6).

namespace naive {

inline double sum_k_smallest(std::vector<double> pool, std::size_t k) {
  if (pool.size() < k || k == 0) throw PreconditionError("naive: pool smaller than k");
  std::sort(pool.begin(), pool.end());
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) acc += pool[j];
  return acc;
}

// Rank ceil((1 - alpha)(m + 1)) capped at m, i.e. ceil(tau * m) for
// tau = (1 - alpha)(1 + 1/m).
inline std::size_t rank(double alpha, std::size_t m) {
  const auto micro = static_cast<long long>(std::llround(alpha * 1e6));
  if (std::abs(alpha * 1e6 - static_cast<double>(micro)) > 1e-6)
    throw PreconditionError("naive: alpha must be a multiple of 1e-6");
  const long long num = (1000000LL - micro) * static_cast<long long>(m + 1);
  const long long r = (num + 999999LL) / 1000000LL;
  return static_cast<std::size_t>(std::clamp<long long>(r, 1, static_cast<long long>(m)));
}

inline double quantile(std::vector<double> s, double alpha) {
  std::sort(s.begin(), s.end());
  return s[rank(alpha, s.size()) - 1];
}

inline std::vector<Label> members(const std::vector<double>& scores, const std::vector<double>& thresholds) {
  std::vector<Label> out;
  for (Label y = 0; y < scores.size(); ++y)
    if (scores[y] <= thresholds[y]) out.push_back(y);
  return out;
}

}  // namespace naive

inline PredictionSet naive_caos(const ScoreTensor& t, double alpha, std::size_t k, std::size_t test_index) {
  const std::size_t n = t.n();
  std::vector<double> calib_scores;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> pool;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) pool.push_back(t.p(i, j));
    calib_scores.push_back(naive::sum_k_smallest(pool, k));
  }
  const double q = naive::quantile(calib_scores, alpha);
  std::vector<double> scores;
  for (Label y = 0; y < t.num_labels(); ++y) {
    std::vector<double> pool;
    for (std::size_t j = 0; j < n; ++j) pool.push_back(t.test(test_index, j, y));
    scores.push_back(naive::sum_k_smallest(pool, k));
  }
  PredictionSet out;
  out.members = naive::members(scores, std::vector<double>(scores.size(), q));
  out.label_scores = std::move(scores);
  out.threshold = q;
  return out;
}

struct NaiveFullResult {
  PredictionSet set;
  std::vector<double> thresholds;
  std::vector<std::vector<double>> calibration_scores;  // [y][i]
};

inline NaiveFullResult naive_full_caos_detailed(const ScoreTensor& t, double alpha, std::size_t k,
                                                std::size_t test_index) {
  if (!t.has_full()) throw PreconditionError("naive full CAOS needs the test-induced block");
  const std::size_t n = t.n();
  NaiveFullResult out;
  for (Label y = 0; y < t.num_labels(); ++y) {
    // Augmented data D_n + {(x_test, y)}; index n is the hypothetical pair.
    std::vector<double> calib_scores;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> pool;
      for (std::size_t j = 0; j <= n; ++j) pool.push_back(j < n ? t.p(i, j) : t.full(test_index, y, i));
      const double self = t.p(i, i);
      for (auto it = pool.begin(); it != pool.end(); ++it)
        if (*it == self) {
          pool.erase(it);
          break;
        }
      calib_scores.push_back(naive::sum_k_smallest(pool, k));
    }
    out.thresholds.push_back(naive::quantile(calib_scores, alpha));
    out.calibration_scores.push_back(calib_scores);

    // Test pool: all n references plus the hypothetical pair scoring itself,
    // minus that self-score. The tensor does not carry the self-score, so a
    // placeholder stands in; it is removed again before aggregation.
    std::vector<double> pool;
    for (std::size_t j = 0; j < n; ++j) pool.push_back(t.test(test_index, j, y));
    const double placeholder = 0.0;
    pool.push_back(placeholder);
    for (auto it = pool.begin(); it != pool.end(); ++it)
      if (*it == placeholder) {
        pool.erase(it);
        break;
      }
    out.set.label_scores.push_back(naive::sum_k_smallest(pool, k));
  }
  out.set.members = naive::members(out.set.label_scores, out.thresholds);
  out.set.threshold = *std::max_element(out.thresholds.begin(), out.thresholds.end());
  return out;
}

inline PredictionSet naive_full_caos(const ScoreTensor& t, double alpha, std::size_t k, std::size_t test_index) {
  return naive_full_caos_detailed(t, alpha, k, test_index).set;
}

// ---------------------------------------------------------------------------
// Monte Carlo coverage harness.

struct TrialOutcome {
  std::uint64_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<Record> records;
};

struct MethodSummary {
  Method method = Method::kCaos;
  double alpha = 0.0;
  std::size_t k = 0;
  double coverage = 0.0;
  double coverage_sem = 0.0;
  double size = 0.0;
  double size_sem = 0.0;
  std::size_t count = 0;
};

struct SimOptions {
  std::vector<double> alphas{0.1};
  std::size_t k = 3;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::vector<Method> methods{Method::kCaos};
  double ref_fraction = 0.5;
  std::size_t workers = 1;
};

inline std::vector<TrialOutcome> run_trials(const SyntheticTaskSpec& base, const SimOptions& opt) {
  if (opt.trials < 1) throw ConfigError("trials: must be at least 1");
  SyntheticTaskSpec spec = base;
  spec.with_full = std::any_of(opt.methods.begin(), opt.methods.end(), method_needs_full) || base.with_full;
  spec.with_calib = std::any_of(opt.methods.begin(), opt.methods.end(), method_needs_calib) || base.with_calib;
  if (!base.with_full && std::any_of(opt.methods.begin(), opt.methods.end(), method_needs_full))
    throw ConfigError("methods: full_caos needs the test-induced block, which is disabled");
  spec.validate();
  if (opt.k + 1 > spec.n) throw ConfigError("k: must be at most n-1");

  std::vector<TrialOutcome> outcomes(opt.trials);
  parallel_for(opt.trials, opt.workers, [&](std::size_t r) {
    SyntheticTaskSpec s = spec;
    s.seed = trial_seed(opt.seed, r);
    const ScoreTensor t = generate_task(s);
    TrialOutcome& o = outcomes[r];
    o.trial = r;
    o.seed = s.seed;
    const MethodOptions mopt{opt.k, opt.ref_fraction, true};
    for (double alpha : opt.alphas) {
      auto recs = evaluate_methods(t, opt.methods, alpha, mopt, r);
      o.records.insert(o.records.end(), recs.begin(), recs.end());
    }
  });
  return outcomes;
}

// Mean and standard error (sample sd / sqrt(count)) of a sequence.
struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
};

inline MeanSem mean_sem(std::span<const double> v) {
  if (v.empty()) return {};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double m = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()))};
}

// Pools every (trial, test point) record per (method, alpha).
inline std::vector<MethodSummary> summarize(std::span<const TrialOutcome> outcomes, const SimOptions& opt) {
  std::vector<MethodSummary> out;
  for (double alpha : opt.alphas)
    for (Method m : opt.methods) {
      std::vector<double> cov, size;
      for (const auto& o : outcomes)
        for (const auto& r : o.records)
          if (r.method == m && r.alpha == alpha) {
            cov.push_back(r.covered);
            size.push_back(r.set_size);
          }
      const auto c = mean_sem(cov);
      const auto s = mean_sem(size);
      out.push_back(MethodSummary{m, alpha, opt.k, c.mean, c.sem, s.mean, s.sem, cov.size()});
    }
  return out;
}

inline std::vector<MethodSummary> coverage_sim(const SyntheticTaskSpec& spec, const SimOptions& opt) {
  const auto outcomes = run_trials(spec, opt);
  return summarize(outcomes, opt);
}

// Lower edge of the 3-sigma binomial band around 1 - alpha for R draws.
inline double coverage_floor(double alpha, std::size_t draws) {
  return (1.0 - alpha) - 3.0 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(draws));
}

}  // namespace caos
