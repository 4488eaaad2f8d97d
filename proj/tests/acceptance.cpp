// Acceptance suite. Each criterion prints one PASS/FAIL line; the process
// exits nonzero if any criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "caos/all.hpp"

namespace {

using namespace caos;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeed = 20260101;
constexpr double kAlphas[] = {0.05, 0.1, 0.2};

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  std::printf("[%s] %d. %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Instance {
  ScoreTensor tensor;
  std::size_t k;
};

// Random synthetic instances with n in [4,20], L in [2,10], k in [1,n-1].
std::vector<Instance> random_instances(std::size_t count, std::uint64_t seed, std::size_t num_test) {
  std::mt19937_64 rng(seed);
  std::vector<Instance> out;
  for (std::size_t c = 0; c < count; ++c) {
    SyntheticTaskSpec s;
    s.n = std::uniform_int_distribution<std::size_t>(4, 20)(rng);
    s.num_labels = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
    s.num_test = num_test;
    s.rho = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    s.sigma = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
    s.seed = rng();
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, s.n - 1)(rng);
    out.push_back({generate_task(s), k});
  }
  return out;
}

bool bits_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
           return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
         });
}

ScoreTensor permute(const ScoreTensor& t, const std::vector<std::size_t>& perm) {
  ScoreTensor out(t.n(), t.num_test(), t.num_labels(), t.has_full());
  for (std::size_t i = 0; i < t.n(); ++i)
    for (std::size_t j = 0; j < t.n(); ++j) out.p(i, j) = t.p(perm[i], perm[j]);
  for (std::size_t r = 0; r < t.num_test(); ++r)
    for (std::size_t j = 0; j < t.n(); ++j)
      for (Label y = 0; y < t.num_labels(); ++y) out.test(r, j, y) = t.test(r, perm[j], y);
  for (std::size_t r = 0; r < t.num_test(); ++r)
    for (Label y = 0; y < t.num_labels(); ++y)
      for (std::size_t i = 0; i < t.n(); ++i) out.full(r, y, i) = t.full(r, y, perm[i]);
  return out;
}

SyntheticTaskSpec coverage_spec() {
  SyntheticTaskSpec s;
  s.n = 30;
  s.num_labels = 8;
  s.num_test = 1;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CAOS_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(CAOS_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Per-trial mean set size of one method.
std::vector<double> trial_sizes(const std::vector<TrialOutcome>& outcomes, Method m) {
  std::vector<double> out;
  for (const auto& o : outcomes) {
    double s = 0;
    std::size_t c = 0;
    for (const auto& r : o.records)
      if (r.method == m) {
        s += r.set_size;
        ++c;
      }
    out.push_back(s / static_cast<double>(c));
  }
  return out;
}

MeanSem paired_gap(const std::vector<double>& larger, const std::vector<double>& smaller) {
  std::vector<double> d(larger.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = larger[i] - smaller[i];
  return mean_sem(d);
}

}  // namespace

int main() {
  const auto instances = random_instances(500, kSeed, 3);

  report(1, "oracle equivalence", [&] {
    std::size_t checks = 0, bad = 0;
    for (const auto& [t, k] : instances)
      for (double alpha : kAlphas) {
        const auto cal = caos_calibrate(t, alpha, k);
        const LooPrefixes loo(t, k);
        for (std::size_t r = 0; r < t.num_test(); ++r) {
          bad += caos_predict(t, r, cal).members != naive_caos(t, alpha, k, r).members;
          bad += full_caos_predict_detailed(loo, t, r, alpha).set.members != naive_full_caos(t, alpha, k, r).members;
          checks += 2;
        }
      }
    return Outcome{bad == 0, fmt("%zu instances, %zu set comparisons, %zu mismatches", instances.size(), checks, bad)};
  });

  report(2, "set inclusion full CAOS within CAOS", [&] {
    const auto inst = random_instances(300, kSeed + 1, 5);
    std::size_t checks = 0, violations = 0;
    for (const auto& [t, k] : inst)
      for (double alpha : kAlphas) {
        const auto cal = caos_calibrate(t, alpha, k);
        const LooPrefixes loo(t, k);
        for (std::size_t r = 0; r < t.num_test(); ++r) {
          const auto a = full_caos_predict_detailed(loo, t, r, alpha).set;
          const auto b = caos_predict(t, r, cal);
          violations += !std::includes(b.members.begin(), b.members.end(), a.members.begin(), a.members.end());
          ++checks;
        }
      }
    return Outcome{violations == 0, fmt("%zu instances, %zu (test point, alpha) pairs, %zu violations", inst.size(),
                                        checks, violations)};
  });

  report(3, "lemma suite", [&] {
    std::mt19937_64 rng(kSeed + 2);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::size_t mono_bad = 0;
    for (int rep = 0; rep < 2000; ++rep) {
      std::vector<double> a(1 + rng() % 20);
      for (auto& x : a) x = rep % 2 ? std::round(u(rng) * 4) / 4 : u(rng);
      const std::size_t k = 1 + rng() % a.size();
      auto sup = a;
      for (std::size_t e = 1 + rng() % 8; e > 0; --e) sup.push_back(rep % 2 ? std::round(u(rng) * 4) / 4 : u(rng));
      std::shuffle(sup.begin(), sup.end(), rng);
      mono_bad += minsum(sup, k) > minsum(a, k);
    }
    std::size_t eq_bad = 0, dom_bad = 0, sym_bad = 0, perms = 0;
    for (const auto& [t, k] : instances) {
      const auto loo_scores = caos_calibration_scores(t, k);
      const LooPrefixes loo(t, k);
      for (std::size_t r = 0; r < t.num_test(); ++r) {
        const auto full = full_caos_predict_detailed(loo, t, r, 0.1);
        eq_bad += !bits_equal(full.set.label_scores, caos_test_scores(t, r, k));
        for (Label y = 0; y < t.num_labels(); ++y) {
          const auto s = full_caos_calibration_scores(loo, t, r, y);
          for (std::size_t i = 0; i < t.n(); ++i) dom_bad += s[i] > loo_scores[i];
        }
      }
      std::vector<std::size_t> perm(t.n());
      std::iota(perm.begin(), perm.end(), 0);
      std::vector<std::vector<Label>> base;
      for (double alpha : kAlphas) {
        const auto cal = caos_calibrate(t, alpha, k);
        for (std::size_t r = 0; r < t.num_test(); ++r) {
          base.push_back(caos_predict(t, r, cal).members);
          base.push_back(full_caos_predict_detailed(loo, t, r, alpha).set.members);
        }
      }
      for (int p = 0; p < 20; ++p) {
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto u_t = permute(t, perm);
        const LooPrefixes u_loo(u_t, k);
        std::size_t idx = 0;
        for (double alpha : kAlphas) {
          const auto cal = caos_calibrate(u_t, alpha, k);
          for (std::size_t r = 0; r < t.num_test(); ++r) {
            sym_bad += caos_predict(u_t, r, cal).members != base[idx++];
            sym_bad += full_caos_predict_detailed(u_loo, u_t, r, alpha).set.members != base[idx++];
          }
        }
        ++perms;
      }
    }
    const bool ok = mono_bad == 0 && eq_bad == 0 && dom_bad == 0 && sym_bad == 0;
    return Outcome{ok, fmt("monotonicity 2000 pairs/%zu bad; test-score equivalence %zu bad; calibration dominance "
                           "%zu bad; symmetry %zu permutations/%zu bad",
                           mono_bad, eq_bad, dom_bad, perms, sym_bad)};
  });

  report(4, "finite-sample coverage", [&] {
    SimOptions opt;
    opt.alphas = {0.05, 0.1, 0.2};
    opt.k = 3;
    opt.trials = 2000;
    opt.seed = kSeed + 3;
    opt.methods = {Method::kCaos, Method::kFullCaos, Method::kScosFixed};
    opt.workers = std::max(1u, std::thread::hardware_concurrency());
    const auto res = coverage_sim(coverage_spec(), opt);
    bool ok = true;
    std::string detail;
    for (const auto& m : res) {
      const double floor = coverage_floor(m.alpha, 2000);
      const bool pass = m.coverage >= floor;
      ok &= pass;
      detail += fmt("%s%s@%.2f=%.4f(>=%.4f%s)", detail.empty() ? "" : " ", std::string(method_tag(m.method)).c_str(),
                    m.alpha, m.coverage, floor, pass ? "" : " MISS");
    }
    return Outcome{ok, detail};
  });

  // Heterogeneous tasks shared by criteria 5 and 6.
  SyntheticTaskSpec het = coverage_spec();
  het.rho = 0.75;
  SimOptions het_opt;
  het_opt.alphas = {0.1};
  het_opt.k = 3;
  het_opt.trials = 500;
  het_opt.seed = kSeed + 5;
  het_opt.methods = {Method::kCaos, Method::kScos, Method::kSplitCaosRef, Method::kSplitCaosRefCal, Method::kSplitCaosCal};
  het_opt.workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<TrialOutcome> het_runs;

  report(5, "directional efficiency CAOS vs SCOS", [&] {
    het_runs = run_trials(het, het_opt);
    const auto caos_s = trial_sizes(het_runs, Method::kCaos);
    const auto scos_s = trial_sizes(het_runs, Method::kScos);
    const auto gap = paired_gap(scos_s, caos_s);
    const double mc = mean_sem(caos_s).mean, ms = mean_sem(scos_s).mean;
    return Outcome{mc < ms && gap.mean > 2.0 * gap.sem,
                   fmt("rho=%.2f R=500: CAOS %.3f vs SCOS %.3f, paired gap %.3f (SE %.3f)", het.rho, mc, ms, gap.mean,
                       gap.sem)};
  });

  report(6, "data-reuse ablation ordering", [&] {
    if (het_runs.empty()) het_runs = run_trials(het, het_opt);
    const auto a = trial_sizes(het_runs, Method::kCaos);
    const auto b = trial_sizes(het_runs, Method::kSplitCaosRef);
    const auto c = trial_sizes(het_runs, Method::kSplitCaosRefCal);
    const auto g1 = paired_gap(b, a), g2 = paired_gap(c, b);
    bool ok = g1.mean > 2.0 * g1.sem && g2.mean > 2.0 * g2.sem;
    std::string detail = fmt("sizes CAOS %.3f <= ref %.3f <= ref+cal %.3f; gaps %.3f (SE %.3f), %.3f (SE %.3f);",
                             mean_sem(a).mean, mean_sem(b).mean, mean_sem(c).mean, g1.mean, g1.sem, g2.mean, g2.sem);
    const auto summary = summarize(het_runs, het_opt);
    for (const auto& m : summary) {
      if (m.method == Method::kScos) continue;
      const double floor = coverage_floor(m.alpha, het_opt.trials);
      ok &= m.coverage >= floor;
      detail += fmt(" cov %s=%.3f(>=%.3f)", std::string(method_tag(m.method)).c_str(), m.coverage, floor);
    }
    return Outcome{ok, detail};
  });

  report(7, "k-robustness harness", [&] {
    const auto dir = scratch("ablate_k");
    const int rc = run_cli(fmt("ablate-k --n 30 --L 8 --T 1 --rho 0 --trials 2000 --alpha 0.1 --seed %llu "
                               "--methods caos --format csv --out %s",
                               static_cast<unsigned long long>(kSeed + 7), dir.string().c_str()));
    if (rc != 0) return Outcome{false, fmt("ablate-k exited with %d", rc)};
    std::ifstream csv(dir / "summary.csv");
    const auto rows = parse_summary_csv(csv);
    bool ok = rows.size() == 10;
    std::string detail = fmt("%zu rows;", rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double floor = coverage_floor(rows[i].alpha, rows[i].trials);
      const bool pass = rows[i].k == i + 1 && rows[i].coverage >= floor;
      ok &= pass;
      detail += fmt(" k=%zu:%.3f/%.2f%s", rows[i].k, rows[i].coverage, rows[i].size, pass ? "" : "(MISS)");
    }
    return Outcome{ok, detail};
  });

  report(8, "determinism and I/O", [&] {
    const auto one = scratch("det_1"), eight = scratch("det_8");
    const std::string common = fmt("sim --n 20 --L 6 --T 2 --trials 300 --alpha 0.05 --alpha 0.1 --alpha 0.2 --k 3 "
                                   "--seed %llu --methods caos,full_caos,scos,scos_oracle,split_caos_ref ",
                                   static_cast<unsigned long long>(kSeed + 8));
    const int rc1 = run_cli(common + "--workers 1 --out " + one.string());
    const int rc8 = run_cli(common + "--workers 8 --out " + eight.string());
    bool ok = rc1 == 0 && rc8 == 0;
    for (const char* f : {"summary.csv", "summary_by_task.csv", "records.jsonl"}) {
      const auto a = slurp(one / f), b = slurp(eight / f);
      ok &= !a.empty() && a == b;
    }
    std::mt19937_64 rng(kSeed + 9);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::size_t roundtrip_bad = 0;
    const auto dir = scratch("roundtrip");
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t n = 2 + rng() % 10, T = rng() % 4, L = 1 + rng() % 6;
      ScoreTensor t(n, T, L, rep % 2 == 0, rep % 3 == 0);
      auto fill = [&](std::span<const double> block) {
        auto* p = const_cast<double*>(block.data());
        for (std::size_t i = 0; i < block.size(); ++i) p[i] = std::ldexp(u(rng), static_cast<int>(rng() % 80) - 40);
      };
      fill(t.p_block());
      fill(t.test_block());
      fill(t.full_block());
      fill(t.calib_block());
      std::vector<Label> truth(T);
      for (auto& y : truth) y = rng() % L;
      t.set_truth(truth);
      save_score_tensor(t, dir);
      const auto back = load_score_tensor(dir);
      roundtrip_bad += !(bits_equal(t.p_block(), back.p_block()) && bits_equal(t.test_block(), back.test_block()) &&
                         bits_equal(t.full_block(), back.full_block()) &&
                         bits_equal(t.calib_block(), back.calib_block()) && back.truth() == t.truth() &&
                         back.has_full() == t.has_full() && back.has_calib() == t.has_calib());
    }
    ok &= roundtrip_bad == 0;
    return Outcome{ok, fmt("1 vs 8 workers byte-identical=%s; 100 tensor round trips, %zu mismatches",
                           rc1 == 0 && rc8 == 0 ? "checked" : "cli failed", roundtrip_bad)};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
