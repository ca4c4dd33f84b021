// samlab: run one experiment, write CSV/JSON artifacts, exit 0 iff every
// asserted claim passes (1 if some fail, 2 on bad input).

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "samlab/emit.hpp"
#include "samlab/harness.hpp"
#include "samlab/selftest.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> eta;
  std::optional<double> rho;
  std::optional<std::size_t> steps;
  std::optional<std::string> algorithm;
  std::optional<std::string> type;
  std::vector<std::string> sets;
  bool print_config = false;
};

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "flat key = value config file")->check(CLI::ExistingFile);
  app->add_option("--out", f.out, "output directory");
  app->add_option("--seed", f.seed, "base seed");
  app->add_option("--eta", f.eta, "learning rate");
  app->add_option("--rho", f.rho, "perturbation radius");
  app->add_option("--steps", f.steps, "number of optimizer steps (0 = default)");
  app->add_option("--algorithm", f.algorithm, "gd, sam, one_sam, asc_gd");
  app->add_option("--type", f.type, "sharpness type: max, asc, avg");
  app->add_option("--set", f.sets, "any other config key, as key=value (repeatable)");
  app->add_flag("--print-config", f.print_config, "print the effective config and exit");
}

samlab::ExperimentConfig build_config(samlab::Experiment e, const Flags& f) {
  using samlab::set_config_value;
  samlab::ExperimentConfig cfg = samlab::default_config(e);
  if (!f.config.empty()) samlab::apply_config_file(cfg, samlab::KeyValueFile::load(f.config));
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, samlab::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (f.out) cfg.out = *f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.eta) cfg.eta = *f.eta;
  if (f.rho) cfg.rho = *f.rho;
  if (f.steps) cfg.steps = *f.steps;
  if (f.algorithm) cfg.algorithm = samlab::parse_algorithm(*f.algorithm);
  if (f.type) cfg.type = samlab::parse_sharpness_type(*f.type);
  return cfg;
}

int run_one(samlab::Experiment e, const Flags& f) {
  const samlab::ExperimentConfig cfg = build_config(e, f);
  if (f.print_config) {
    std::cout << samlab::format_config(cfg);
    return 0;
  }
  samlab::validate_config(cfg);
  samlab::prepare_output_dir(cfg.out);
  const samlab::RunOutput out = samlab::run_experiment(cfg);
  const std::size_t dim = samlab::resolve_loss(cfg)->dimension();
  for (const auto& path : samlab::emit(out, cfg.out, dim)) std::cerr << "wrote " << path << "\n";

  for (const auto& c : out.summary.claims) {
    std::printf("%-4s %-28s measured %-12.6g target %-12.6g tol %-10.4g %s\n",
                c.asserted ? (c.pass ? "PASS" : "FAIL") : "info", c.id.c_str(), c.measured, c.target, c.tolerance,
                c.provenance.c_str());
  }
  for (const auto& [k, v] : out.summary.notes) std::printf("  %s: %s\n", k.c_str(), v.c_str());
  return out.summary.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"samlab: sharpness-aware minimization experiments on tractable losses"};
  app.require_subcommand(1);

  const std::pair<const char*, samlab::Experiment> experiments[] = {
      {"quadratic", samlab::Experiment::kQuadratic},
      {"toy4d", samlab::Experiment::kToy4D},
      {"flow-compare", samlab::Experiment::kFlowCompare},
      {"sharpness-scan", samlab::Experiment::kSharpnessScan},
      {"explicit-bias", samlab::Experiment::kExplicitBias},
  };
  Flags flags;
  std::optional<samlab::Experiment> chosen;
  for (const auto& [name, e] : experiments) {
    CLI::App* sub = app.add_subcommand(name, "run the " + std::string(name) + " experiment");
    add_flags(sub, flags);
    sub->callback([&chosen, e = e] { chosen = e; });
  }

  std::vector<int> only;
  CLI::App* self = app.add_subcommand("selftest", "run the full property suite (criteria 1-11)");
  self->add_option("--only", only, "criterion numbers to run");

  CLI11_PARSE(app, argc, argv);

  try {
    if (self->parsed()) {
      bool ok = true;
      samlab::run_selftest(only, [&ok](const samlab::CriterionResult& r) {
        std::printf("%s\n", samlab::format_result(r).c_str());
        std::fflush(stdout);
        ok = ok && r.pass;
      });
      return ok ? 0 : 1;
    }
    return run_one(*chosen, flags);
  } catch (const std::exception& e) {
    std::cerr << "samlab: " << e.what() << "\n";
    return 2;
  }
}
