#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bossopt/eval.hpp"
#include "bossopt/io.hpp"
#include "bossopt/pipeline.hpp"
#include "bossopt/verify.hpp"

namespace fs = std::filesystem;
using namespace bossopt;

namespace {

RunConfig load_run_config(const std::string& config_path) {
  if (config_path.empty()) return RunConfig{};
  const std::string text = read_text_file(config_path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{')
    return config_from_manifest_json(text);  // re-run straight from a manifest
  std::istringstream is(text);
  return RunConfig::from_map(parse_flat_config(is));
}

int cmd_run(const std::string& config_path, const std::string& task_override,
            const std::string& mode_override, long long seed_override, int seeds_override,
            const std::string& out_dir, bool force) {
  RunConfig cfg = load_run_config(config_path);
  if (!task_override.empty()) cfg.task = task_override;
  if (!mode_override.empty()) cfg.boss.mode = reg_mode_from_string(mode_override);
  if (seed_override >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
  if (seeds_override > 0) {
    cfg.seeds.clear();
    for (int i = 1; i <= seeds_override; ++i) cfg.seeds.push_back(i);
  }
  cfg.validate();

  const TaskSpec task = make_task(cfg.task);
  const auto [train, holdout] = make_offline_dataset(task, cfg.recipe);
  const RunOutputs outputs = run_all(task, train, holdout, cfg);
  write_run_artifacts(out_dir, cfg, outputs, force);

  std::printf("task=%s method=%s regularizer=%s seeds=%zu\n", cfg.task.c_str(),
              cfg.method.c_str(), to_string(cfg.boss.mode).c_str(), cfg.seeds.size());
  std::printf("p100 %.4f +- %.4f | p75 %.4f +- %.4f | p50 %.4f +- %.4f | rmse_ood %.4f\n",
              outputs.agg.mean_p100, outputs.agg.std_p100, outputs.agg.mean_p75,
              outputs.agg.std_p75, outputs.agg.mean_p50, outputs.agg.std_p50,
              outputs.agg.mean_rmse);
  std::printf("artifacts written to %s\n", out_dir.c_str());
  for (const auto& f : outputs.failures)
    std::fprintf(stderr, "seed %llu failed: %s\n",
                 static_cast<unsigned long long>(f.seed), f.error.c_str());
  return outputs.failures.empty() ? 0 : 1;
}

int cmd_verify() {
  const std::vector<CheckResult> results = run_verification();
  std::size_t failures = 0;
  std::printf("%-36s %-6s %-14s %-14s %s\n", "check", "status", "measured", "tolerance",
              "detail");
  for (const auto& r : results) {
    if (!r.pass) ++failures;
    std::printf("%-36s %-6s %-14.6g %-14.6g %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                r.measured, r.tolerance, r.detail.c_str());
  }
  std::printf("%zu/%zu checks passed\n", results.size() - failures, results.size());
  return failures == 0 ? 0 : 1;
}

int cmd_bench(std::vector<int> m_values, const std::string& out_dir) {
  if (m_values.empty()) {
    std::fprintf(stderr, "bench: empty m list\n");
    return 2;
  }
  const TaskSpec task = make_task("neg-sphere-d8");
  DatasetRecipe recipe;
  recipe.seed = 1;
  const auto [train, holdout] = make_offline_dataset(task, recipe);
  RunConfig rc;
  const MlpSpec spec = rc.mlp_spec(task.d);
  BossConfig cfg = rc.boss;
  cfg.iters = 20;
  cfg.seed = 1;

  const auto rows = runtime_scaling(train, spec, cfg, m_values);
  std::ostringstream os;
  os << "m,seconds\n";
  for (const auto& row : rows) os << row.m << ',' << format_double(row.seconds) << '\n';
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / "bench.csv").string();
  write_text_file(path, os.str());
  std::printf("%s", os.str().c_str());
  std::printf("written to %s\n", path.c_str());
  return 0;
}

int cmd_tune(const std::string& task_id, int n_seeds, const std::string& out_dir,
             const std::string& config_path) {
  RunConfig rc = load_run_config(config_path);
  if (!task_id.empty()) rc.task = task_id;
  const TaskSpec task = make_task(rc.task);
  const auto [train, holdout] = make_offline_dataset(task, rc.recipe);
  const MlpSpec spec = rc.mlp_spec(task.d);
  const SearchConfig scfg = search_config_for(task, rc);

  // Frozen baseline surrogate acting as the scorer.
  BossConfig base_cfg = rc.boss;
  base_cfg.mode = RegMode::None;
  base_cfg.seed = 97;
  const SurrogateParams base =
      boss_train(train, spec, base_cfg,
                 init_params_centered(spec, SeededRng(base_cfg.seed).fork("init"), train))
          .params;

  const std::vector<double> alphas = {0.01, 0.1, 1.0};
  std::vector<BossConfig> grid;
  for (double a : alphas) {
    BossConfig c = rc.boss;
    c.alpha = a;
    grid.push_back(c);
  }
  std::vector<std::uint64_t> seeds;
  for (int i = 1; i <= n_seeds; ++i) seeds.push_back(i);

  const TuneResult res = pseudo_oracle_tune(base, grid, task, train, spec, scfg, seeds);
  std::ostringstream os;
  os << "alpha,pseudo_score\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    os << format_double(grid[i].alpha) << ',' << format_double(res.pseudo_scores[i]) << '\n';
  std::printf("%s", os.str().c_str());
  std::printf("selected alpha = %g\n", grid[res.best_index].alpha);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "tune.csv").string(), os.str());
  }
  return 0;
}

int cmd_export_dataset(const std::string& task_id, const std::string& out_path,
                       long long seed) {
  const TaskSpec task = make_task(task_id.empty() ? "neg-sphere-d8" : task_id);
  DatasetRecipe recipe;
  if (seed >= 0) recipe.seed = static_cast<std::uint64_t>(seed);
  const auto [train, holdout] = make_offline_dataset(task, recipe);
  std::ostringstream os;
  write_dataset_csv(train, os);
  write_text_file(out_path, os.str());
  std::printf("wrote %zu rows (d=%zu) to %s\n", train.n(), train.d, out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline black-box optimization with sensitivity-regularized surrogates"};
  app.require_subcommand(1);

  std::string config_path, task_id, mode, out_dir = "out", export_path = "dataset.csv";
  long long seed = -1;
  int seeds = 0;
  bool force = false;
  std::vector<int> m_values = {25, 50, 100, 200, 400};

  CLI::App* run = app.add_subcommand("run", "train, search and evaluate over seeds");
  run->add_option("--config", config_path, "flat config file or manifest.json");
  run->add_option("--task", task_id, "task id override");
  run->add_option("--mode", mode, "regularizer mode override (none|boss|boss2|l1|l2)");
  run->add_option("--seed", seed, "run a single seed");
  run->add_option("--seeds", seeds, "run seeds 1..N");
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--force", force, "overwrite existing results");

  CLI::App* verify = app.add_subcommand("verify", "run the oracle/property suite");

  CLI::App* bench = app.add_subcommand("bench", "time the trainer across m values");
  bench->add_option("--m", m_values, "perturbation sample counts");
  bench->add_option("--out", out_dir, "output directory");

  CLI::App* tune = app.add_subcommand("tune", "pseudo-oracle alpha selection");
  tune->add_option("--task", task_id, "task id");
  tune->add_option("--seeds", seeds, "seeds per configuration");
  tune->add_option("--out", out_dir, "output directory");
  tune->add_option("--config", config_path, "flat config file");

  CLI::App* exp = app.add_subcommand("export-dataset", "write the offline dataset as CSV");
  exp->add_option("--task", task_id, "task id");
  exp->add_option("--out", export_path, "output file");
  exp->add_option("--seed", seed, "dataset seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed())
      return cmd_run(config_path, task_id, mode, seed, seeds, out_dir, force);
    if (verify->parsed()) return cmd_verify();
    if (bench->parsed()) return cmd_bench(m_values, out_dir);
    if (tune->parsed()) return cmd_tune(task_id, seeds > 0 ? seeds : 4, out_dir, config_path);
    if (exp->parsed()) return cmd_export_dataset(task_id, export_path, seed);
  } catch (const ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
