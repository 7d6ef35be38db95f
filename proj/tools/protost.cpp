// Command-line front end. Exit codes: 0 ok, 1 validation/config/format,
// 2 missing prerequisite, 3 numeric failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "protost/config.hpp"
#include "protost/error.hpp"
#include "protost/pipeline.hpp"

namespace {

int exit_code(protost::ErrorKind k) {
  using protost::ErrorKind;
  switch (k) {
    case ErrorKind::kPrerequisite:
      return 2;
    case ErrorKind::kNumeric:
      return 3;
    default:
      return 1;
  }
}

void print_evals(const std::vector<protost::EvalSummary>& evals) {
  for (const auto& e : evals) std::cout << "[" << e.tag << "] " << protost::eval_report_text(e.report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototype-based self-training on synthetic domain-shift worlds"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "base seed; derived seeds follow it");
  app.add_option("--out", out_dir, "output directory (paths.out)");
  app.add_option("--set", overrides, "section.key=value override, repeatable");

  std::string pred_path, truth_path;
  int eval_classes = 0;
  std::string deltas_arg, ks_arg;

  struct Entry {
    const char* name;
    const char* help;
  };
  const std::vector<Entry> commands = {
      {"gen-bench", "generate the synthetic world"},
      {"warmup", "train the source-only model"},
      {"fit-maps", "fit per-class Gaussian mixtures and centroids on source features"},
      {"assign-pl", "pseudo-label target maps with the mixture model"},
      {"fit-target-protos", "cluster target features into prototypes"},
      {"compute-stm", "compute source transferability maps"},
      {"self-train", "self-train from the warmup model"},
      {"evaluate", "evaluate trained models, or one LMAP against another"},
      {"run-all", "run the full chain"},
      {"sweep-delta", "pseudo-label and self-train for each delta"},
      {"sweep-k", "refit mixtures and self-train for each component count"},
      {"bench-pla", "compare pseudo-label assigners"},
      {"show-config", "print the effective configuration"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) subs.push_back(app.add_subcommand(c.name, c.help));
  auto* eval_cmd = app.get_subcommand("evaluate");
  eval_cmd->add_option("--pred", pred_path, "predicted LMAP");
  eval_cmd->add_option("--truth", truth_path, "ground-truth LMAP");
  eval_cmd->add_option("--classes", eval_classes, "class count (default: inferred)");
  app.get_subcommand("sweep-delta")->add_option("--deltas", deltas_arg, "comma-separated deltas");
  app.get_subcommand("sweep-k")->add_option("--ks", ks_arg, "comma-separated component counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  seed_set = seed_opt->count() > 0;

  try {
    protost::PipelineConfig cfg = config_path.empty() ? protost::PipelineConfig{} : protost::load_config(config_path);
    for (const auto& o : overrides) protost::apply_override(cfg, o);
    if (seed_set) cfg.seeds.base = seed;
    if (!out_dir.empty()) cfg.paths.out = out_dir;
    if (!deltas_arg.empty()) protost::apply_override(cfg, "sweep.deltas=" + deltas_arg);
    if (!ks_arg.empty()) protost::apply_override(cfg, "sweep.ks=" + ks_arg);
    cfg.validate();

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "gen-bench") {
      protost::cmd_gen_bench(cfg);
    } else if (cmd == "warmup") {
      protost::cmd_warmup(cfg);
    } else if (cmd == "fit-maps") {
      protost::cmd_fit_maps(cfg);
    } else if (cmd == "assign-pl") {
      protost::cmd_assign_pl(cfg);
    } else if (cmd == "fit-target-protos") {
      protost::cmd_fit_target_protos(cfg);
    } else if (cmd == "compute-stm") {
      protost::cmd_compute_stm(cfg);
    } else if (cmd == "self-train") {
      protost::cmd_self_train(cfg);
    } else if (cmd == "evaluate") {
      if (!pred_path.empty() || !truth_path.empty()) {
        if (pred_path.empty() || truth_path.empty())
          protost::fail(protost::ErrorKind::kValidation, "--pred and --truth go together");
        std::cout << protost::eval_report_text(protost::evaluate_label_files(pred_path, truth_path, eval_classes));
      } else {
        print_evals(protost::cmd_evaluate(cfg));
      }
    } else if (cmd == "run-all") {
      print_evals(protost::cmd_run_all(cfg));
    } else if (cmd == "sweep-delta") {
      std::cout << "delta,pl_ratio,pl_accuracy,miou\n";
      for (const auto& r : protost::cmd_sweep_delta(cfg))
        std::printf("%.6f,%.6f,%.6f,%.6f\n", r.delta, r.pl_ratio, r.pl_accuracy, r.miou);
    } else if (cmd == "sweep-k") {
      std::cout << "k,pl_ratio,pl_accuracy,miou\n";
      for (const auto& r : protost::cmd_sweep_k(cfg))
        std::printf("%zu,%.6f,%.6f,%.6f\n", r.k, r.pl_ratio, r.pl_accuracy, r.miou);
    } else if (cmd == "bench-pla") {
      std::cout << "strategy,threshold,pl_ratio,pl_accuracy\n";
      for (const auto& r : protost::cmd_bench_pla(cfg))
        std::printf("%s,%.9g,%.6f,%.6f\n", r.strategy.c_str(), r.threshold, r.pl_ratio, r.pl_accuracy);
    } else if (cmd == "show-config") {
      std::cout << protost::render_config(cfg);
    }
  } catch (const protost::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
