// Command-line front end: calibrate and evaluate conformal one-shot methods
// on score tensors or synthetic tasks, and run the coverage/ablation drivers.

#include <cstdlib>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "caos/all.hpp"

namespace {

struct Flags {
  std::optional<std::string> spec_file;
  std::vector<double> alphas;
  std::vector<std::size_t> ks;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> workers;
  std::vector<std::string> methods;
  std::optional<std::string> tensor;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::size_t> n, num_test, num_labels, dim;
  std::optional<double> sigma, rho, ref_fraction;
};

void add_common(CLI::App* cmd, Flags& f, bool with_source = true) {
  cmd->add_option("--spec", f.spec_file, "Config file of key = value lines");
  cmd->add_option("--alpha", f.alphas, "Miscoverage level (repeatable)");
  cmd->add_option("--k", f.ks, "Aggregation size (repeatable for ablate-k)");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--trials", f.trials, "Monte Carlo trials for synthetic sources");
  cmd->add_option("--workers", f.workers, "Worker threads");
  cmd->add_option("--methods", f.methods, "Comma separated method tags")->delimiter(',');
  if (with_source) cmd->add_option("--tensor", f.tensor, "Score-tensor package directory");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--format", f.format, "csv, jsonl or both");
  cmd->add_option("--n", f.n, "Synthetic calibration size");
  cmd->add_option("--T", f.num_test, "Synthetic test points per trial");
  cmd->add_option("--L", f.num_labels, "Synthetic label count");
  cmd->add_option("--d", f.dim, "Synthetic latent dimension");
  cmd->add_option("--sigma", f.sigma, "Synthetic noise scale");
  cmd->add_option("--rho", f.rho, "Synthetic reference-quality heterogeneity");
  cmd->add_option("--ref-fraction", f.ref_fraction, "Reference share of the split baselines");
}

// Precedence: built-in defaults, then the --spec file, then flags, then the
// CAOS_WORKERS / CAOS_OUT_DIR environment variables.
caos::RunConfig resolve(const Flags& f) {
  caos::RunConfig cfg;
  if (f.spec_file) caos::load_config_file(cfg, *f.spec_file);
  auto& e = cfg.experiment;
  auto& s = cfg.synthetic;
  if (!f.alphas.empty()) e.alphas = f.alphas;
  if (!f.ks.empty()) {
    cfg.k_values = f.ks;
    e.k = f.ks.front();
  }
  if (f.seed) e.seed = *f.seed;
  if (f.trials) e.trials = *f.trials;
  if (f.workers) e.workers = *f.workers;
  if (!f.methods.empty()) {
    e.methods.clear();
    for (const auto& m : f.methods) e.methods.push_back(caos::parse_method(m));
  }
  if (f.tensor) cfg.tensor = *f.tensor;
  if (f.out) cfg.out = *f.out;
  if (f.format) cfg.format = caos::parse_format(*f.format);
  if (f.n) s.n = *f.n;
  if (f.num_test) s.num_test = *f.num_test;
  if (f.num_labels) s.num_labels = *f.num_labels;
  if (f.dim) s.dim = *f.dim;
  if (f.sigma) s.sigma = *f.sigma;
  if (f.rho) s.rho = *f.rho;
  if (f.ref_fraction) e.ref_fraction = *f.ref_fraction;
  if (const char* w = std::getenv("CAOS_WORKERS"); w && *w) caos::apply_config_entry(cfg, "workers", w);
  if (const char* o = std::getenv("CAOS_OUT_DIR"); o && *o) cfg.out = o;
  s.seed = e.seed;
  return cfg;
}

caos::InputSource source_of(const caos::RunConfig& cfg) {
  if (cfg.tensor) {
    auto t = caos::load_score_tensor(*cfg.tensor);
    t.validate();
    return t;
  }
  return cfg.synthetic;
}

void emit(const caos::EvalReport& report, const caos::RunConfig& cfg) {
  if (cfg.out) {
    caos::emit_report(report, cfg.format, *cfg.out);
    return;
  }
  if (cfg.format == caos::ReportFormat::kJsonl)
    caos::write_records_jsonl(std::cout, report.records);
  else
    caos::write_summary_csv(std::cout, report.rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal aggregation of one-shot predictors"};
  app.require_subcommand(1);

  Flags run_f, sim_f, abk_f, abs_f, exp_f;
  std::string validate_path;
  auto* run = app.add_subcommand("run", "Evaluate methods on a score tensor or synthetic tasks");
  add_common(run, run_f);
  auto* sim = app.add_subcommand("sim", "Monte Carlo coverage on synthetic exchangeable tasks");
  add_common(sim, sim_f, false);
  auto* abk = app.add_subcommand("ablate-k", "Sweep the aggregation size k");
  add_common(abk, abk_f);
  auto* abs = app.add_subcommand("ablate-splits", "Compare CAOS with its split data-reuse variants");
  add_common(abs, abs_f);
  auto* val = app.add_subcommand("validate", "Check a score-tensor package");
  val->add_option("--tensor", validate_path, "Score-tensor package directory")->required();
  auto* exp = app.add_subcommand("export-synthetic", "Write a synthetic task as a score-tensor package");
  add_common(exp, exp_f, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      const auto cfg = resolve(run_f);
      emit(caos::run_experiment(cfg.experiment, source_of(cfg)), cfg);
    } else if (*sim) {
      auto cfg = resolve(sim_f);
      if (sim_f.methods.empty() && !sim_f.spec_file)
        cfg.experiment.methods = {caos::Method::kCaos, caos::Method::kFullCaos, caos::Method::kScosFixed};
      emit(caos::run_experiment(cfg.experiment, cfg.synthetic), cfg);
    } else if (*abk) {
      auto cfg = resolve(abk_f);
      if (abk_f.methods.empty() && !abk_f.spec_file) cfg.experiment.methods = {caos::Method::kCaos};
      std::vector<std::size_t> ks = cfg.k_values;
      if (ks.empty()) {
        ks.resize(10);
        std::iota(ks.begin(), ks.end(), std::size_t{1});
      }
      cfg.experiment.k = ks.front();
      emit(caos::ablate_k(cfg.experiment, source_of(cfg), ks), cfg);
    } else if (*abs) {
      auto cfg = resolve(abs_f);
      cfg.experiment.methods = {caos::Method::kCaos, caos::Method::kSplitCaosRef, caos::Method::kSplitCaosCal,
                                caos::Method::kSplitCaosRefCal, caos::Method::kScos};
      emit(caos::run_experiment(cfg.experiment, source_of(cfg)), cfg);
    } else if (*val) {
      const auto t = caos::load_score_tensor(validate_path);
      t.validate();
      std::cout << "ok: n=" << t.n() << " T=" << t.num_test() << " L=" << t.num_labels()
                << " full=" << (t.has_full() ? "yes" : "no") << " truth=" << (t.has_truth() ? "yes" : "no")
                << " calib=" << (t.has_calib() ? "yes" : "no") << '\n';
    } else if (*exp) {
      const auto cfg = resolve(exp_f);
      if (!cfg.out) throw caos::ConfigError("out: export-synthetic needs --out");
      caos::SyntheticTaskSpec s = cfg.synthetic;
      s.with_full = true;
      s.with_calib = true;
      caos::save_score_tensor(caos::generate_task(s), *cfg.out);
    }
  } catch (const caos::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
