#pragma once

// Runs the conformal methods on one score tensor and produces one record
// per (method, test point).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "caos/caos.hpp"
#include "caos/core.hpp"
#include "caos/fullconf.hpp"
#include "caos/scos.hpp"

namespace caos {

inline std::string_view method_tag(Method m) {
  switch (m) {
    case Method::kCaos: return "caos";
    case Method::kFullCaos: return "full_caos";
    case Method::kScos: return "scos";
    case Method::kScosFixed: return "scos_fixed";
    case Method::kScosBest: return "scos_best";
    case Method::kScosOracle: return "scos_oracle";
    case Method::kSplitCaosRefCal: return "split_caos_ref_cal";
    case Method::kSplitCaosCal: return "split_caos_cal";
    case Method::kSplitCaosRef: return "split_caos_ref";
  }
  return "unknown";
}

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> v{Method::kCaos,          Method::kFullCaos,        Method::kScos,
                                     Method::kScosFixed,     Method::kScosBest,        Method::kScosOracle,
                                     Method::kSplitCaosRefCal, Method::kSplitCaosCal,  Method::kSplitCaosRef};
  return v;
}

inline Method parse_method(std::string_view tag) {
  for (Method m : all_methods())
    if (method_tag(m) == tag) return m;
  throw ConfigError("methods: unknown method '" + std::string(tag) + "'");
}

// Report flags attached to a method regardless of outcome.
inline std::string method_flags(Method m) {
  switch (m) {
    case Method::kScosBest: return "no-coverage-guarantee";
    case Method::kScosOracle: return "hindsight";
    default: return "";
  }
}

inline bool method_needs_full(Method m) { return m == Method::kFullCaos; }
inline bool method_needs_calib(Method m) { return m == Method::kScosBest; }

// One evaluated (method, test point). For the averaged SCOS baseline,
// set_size, covered and threshold are means over reference predictors, so
// `covered` is a fraction in [0,1] rather than an indicator.
struct Record {
  std::uint64_t trial = 0;
  std::size_t test_index = 0;
  Method method = Method::kCaos;
  double alpha = 0.0;
  std::size_t k = 0;
  double set_size = 0.0;
  double covered = 0.0;
  double threshold = 0.0;
  bool oracle_fallback = false;
  friend bool operator==(const Record&, const Record&) = default;
};

struct MethodOptions {
  std::size_t k = 3;
  double ref_fraction = 0.5;
  // Throw InvariantViolation if a full-CAOS set is not contained in the
  // matching CAOS set.
  bool check_inclusion = true;
};

inline std::vector<Record> evaluate_methods(const ScoreTensor& t, const std::vector<Method>& methods,
                                            double alpha, const MethodOptions& opt,
                                            std::uint64_t trial = 0) {
  if (!t.has_truth()) throw DataError("evaluation needs truth labels for the test block");
  const auto& truth = t.truth();
  const std::size_t T = t.num_test();
  std::vector<Record> out;
  auto emit = [&](Method m, std::size_t test, double size, double covered, double thr,
                  bool fallback = false) {
    out.push_back(Record{trial, test, m, alpha, opt.k, size, covered, thr, fallback});
  };
  auto emit_set = [&](Method m, std::size_t test, const PredictionSet& s) {
    emit(m, test, static_cast<double>(s.size()), s.contains(truth[test]) ? 1.0 : 0.0, s.threshold);
  };

  std::optional<SplitSpec> split;
  auto get_split = [&]() -> const SplitSpec& {
    if (!split) split = SplitSpec::leading(t.n(), opt.ref_fraction);
    return *split;
  };
  std::optional<CalibrationResult> caos_cal;
  auto get_caos = [&]() -> const CalibrationResult& {
    if (!caos_cal) caos_cal = caos_calibrate(t, alpha, opt.k);
    return *caos_cal;
  };

  for (Method m : methods) {
    switch (m) {
      case Method::kCaos: {
        for (std::size_t test = 0; test < T; ++test) emit_set(m, test, caos_predict(t, test, get_caos()));
        break;
      }
      case Method::kFullCaos: {
        if (!t.has_full()) throw DataError("method full_caos needs the test-induced score block");
        const LooPrefixes loo(t, opt.k);
        for (std::size_t test = 0; test < T; ++test) {
          const auto full = full_caos_predict_detailed(loo, t, test, alpha);
          if (opt.check_inclusion) {
            const auto loo_set = caos_predict(t, test, get_caos());
            for (Label y : full.set.members)
              if (!loo_set.contains(y))
                throw InvariantViolation("full CAOS set not contained in CAOS set at test point " +
                                         std::to_string(test) + ", label " + std::to_string(y));
          }
          const Label y_true = truth[test];
          emit(m, test, static_cast<double>(full.set.size()), full.set.contains(y_true) ? 1.0 : 0.0,
               full.thresholds[y_true]);
        }
        break;
      }
      case Method::kScos: {
        const auto avg = scos_average_report(t, get_split(), alpha);
        for (std::size_t test = 0; test < T; ++test)
          emit(m, test, avg.size_per_test[test], avg.covered_per_test[test], avg.threshold_per_test[test]);
        break;
      }
      case Method::kScosFixed:
      case Method::kScosBest: {
        const std::size_t ref = m == Method::kScosFixed ? get_split().reference().front()
                                                        : scos_best_select(t, get_split(), alpha);
        const auto cal = scos_calibrate(t, get_split(), ref, alpha);
        for (std::size_t test = 0; test < T; ++test) emit_set(m, test, scos_predict(t, test, ref, cal));
        break;
      }
      case Method::kScosOracle: {
        for (std::size_t test = 0; test < T; ++test) {
          const auto choice = scos_oracle_predict(t, get_split(), alpha, test, truth[test]);
          emit(m, test, static_cast<double>(choice.set.size()), choice.set.contains(truth[test]) ? 1.0 : 0.0,
               choice.set.threshold, !choice.contains_truth);
        }
        break;
      }
      case Method::kSplitCaosRefCal:
      case Method::kSplitCaosCal:
      case Method::kSplitCaosRef: {
        const SplitVariant v = m == Method::kSplitCaosRefCal ? SplitVariant::kRefAndCal
                               : m == Method::kSplitCaosCal  ? SplitVariant::kCalOnly
                                                             : SplitVariant::kRefOnly;
        const auto res = split_caos_variant(t, get_split(), alpha, opt.k, v);
        for (std::size_t test = 0; test < T; ++test) emit_set(m, test, res.sets[test]);
        break;
      }
    }
  }
  return out;
}

}  // namespace caos
