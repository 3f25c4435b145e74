#include "bossopt/pipeline.hpp"

#include <filesystem>
#include <sstream>

#include <json.hpp>

namespace bossopt {

namespace fs = std::filesystem;
using nlohmann::json;

MlpSpec RunConfig::mlp_spec(std::size_t d) const {
  MlpSpec spec;
  spec.layer_sizes.push_back(static_cast<int>(d));
  for (int h : hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(1);
  spec.activation = activation;
  return spec;
}

void RunConfig::validate() const {
  BOSSOPT_REQUIRE(method == "ga" || method == "ens-min" || method == "ens-mean",
                  "RunConfig: unknown method '" + method + "'");
  BOSSOPT_REQUIRE(ensemble >= 2, "RunConfig: ensemble must be >= 2");
  BOSSOPT_REQUIRE(!seeds.empty(), "RunConfig: no seeds");
  recipe.validate();
  boss.validate();
  BOSSOPT_REQUIRE(!hidden.empty() || true, "");
  make_task(task);  // throws on unknown id
}

namespace {

std::string join_u64(const std::vector<std::uint64_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::string join_int(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

class MapReader {
 public:
  explicit MapReader(FlatConfig map) : map_(std::move(map)) {}

  bool has(const std::string& key) const { return map_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    const std::string v = it->second;
    map_.erase(it);
    return v;
  }
  double num(const std::string& key, double fallback) {
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    try {
      const double v = std::stod(it->second);
      map_.erase(it);
      return v;
    } catch (const std::exception&) {
      throw ContractError("config: bad numeric value for '" + key + "'");
    }
  }
  void finish() const {
    if (map_.empty()) return;
    std::string keys;
    for (const auto& [k, _] : map_) keys += (keys.empty() ? "" : ", ") + k;
    throw ContractError("config: unknown key(s): " + keys);
  }

 private:
  FlatConfig map_;
};

}  // namespace

FlatConfig RunConfig::to_map() const {
  FlatConfig m;
  m["task"] = task;
  m["method"] = method;
  m["ensemble"] = std::to_string(ensemble);
  m["run.seeds"] = join_u64(seeds);
  m["dataset.n_raw"] = std::to_string(recipe.n_raw);
  m["dataset.keep"] = format_double(recipe.keep_fraction);
  m["dataset.holdout"] = format_double(recipe.holdout_fraction);
  m["dataset.seed"] = std::to_string(recipe.seed);
  m["mlp.hidden"] = join_int(hidden);
  m["mlp.activation"] = to_string(activation);
  m["boss.alpha"] = format_double(boss.alpha);
  m["boss.lambda"] = format_double(boss.lambda);
  m["boss.m"] = std::to_string(boss.m);
  m["boss.iters"] = std::to_string(boss.iters);
  m["boss.eta_omega"] = format_double(boss.eta_omega);
  m["boss.eta_phi"] = format_double(boss.eta_phi);
  m["boss.mu_init"] = format_double(boss.mu_init);
  m["boss.sigma_init"] = format_double(boss.sigma_init);
  m["boss.mu_lo"] = format_double(boss.mu_lo);
  m["boss.mu_hi"] = format_double(boss.mu_hi);
  m["boss.sigma_lo"] = format_double(boss.sigma_lo);
  m["boss.sigma_hi"] = format_double(boss.sigma_hi);
  m["boss.mode"] = to_string(boss.mode);
  m["boss.delta_mode"] = to_string(boss.delta_mode);
  m["boss.phi_grad_mode"] = to_string(boss.phi_grad_mode);
  m["boss.phi_epochs"] = std::to_string(boss.phi_epochs);
  m["boss.fit_batch"] = std::to_string(boss.fit_batch);
  m["search.k"] = std::to_string(search.k);
  m["search.steps"] = std::to_string(search.steps);
  m["search.step_size"] = format_double(search.step_size);
  return m;
}

RunConfig RunConfig::from_map(const FlatConfig& map) {
  RunConfig cfg;
  MapReader r(map);
  cfg.task = r.str("task", cfg.task);
  cfg.method = r.str("method", cfg.method);
  cfg.ensemble = static_cast<int>(r.num("ensemble", cfg.ensemble));
  if (r.has("run.seeds")) {
    cfg.seeds.clear();
    for (const auto& tok : split(r.str("run.seeds", ""), ','))
      if (!tok.empty()) cfg.seeds.push_back(std::stoull(tok));
  } else {
    const int n = static_cast<int>(r.num("run.n_seeds", 8));
    BOSSOPT_REQUIRE(n >= 1, "config: run.n_seeds must be >= 1");
    cfg.seeds.clear();
    for (int i = 1; i <= n; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(i));
  }
  cfg.recipe.n_raw = static_cast<std::size_t>(r.num("dataset.n_raw", cfg.recipe.n_raw));
  cfg.recipe.keep_fraction = r.num("dataset.keep", cfg.recipe.keep_fraction);
  cfg.recipe.holdout_fraction = r.num("dataset.holdout", cfg.recipe.holdout_fraction);
  cfg.recipe.seed = static_cast<std::uint64_t>(r.num("dataset.seed", 0));
  if (r.has("mlp.hidden")) {
    cfg.hidden.clear();
    for (const auto& tok : split(r.str("mlp.hidden", ""), ','))
      if (!tok.empty()) cfg.hidden.push_back(std::stoi(tok));
  }
  cfg.activation = activation_from_string(r.str("mlp.activation", to_string(cfg.activation)));
  cfg.boss.alpha = r.num("boss.alpha", cfg.boss.alpha);
  cfg.boss.lambda = r.num("boss.lambda", cfg.boss.lambda);
  cfg.boss.m = static_cast<int>(r.num("boss.m", cfg.boss.m));
  cfg.boss.iters = static_cast<int>(r.num("boss.iters", cfg.boss.iters));
  cfg.boss.eta_omega = r.num("boss.eta_omega", cfg.boss.eta_omega);
  cfg.boss.eta_phi = r.num("boss.eta_phi", cfg.boss.eta_phi);
  cfg.boss.mu_init = r.num("boss.mu_init", cfg.boss.mu_init);
  cfg.boss.sigma_init = r.num("boss.sigma_init", cfg.boss.sigma_init);
  cfg.boss.mu_lo = r.num("boss.mu_lo", cfg.boss.mu_lo);
  cfg.boss.mu_hi = r.num("boss.mu_hi", cfg.boss.mu_hi);
  cfg.boss.sigma_lo = r.num("boss.sigma_lo", cfg.boss.sigma_lo);
  cfg.boss.sigma_hi = r.num("boss.sigma_hi", cfg.boss.sigma_hi);
  cfg.boss.mode = reg_mode_from_string(r.str("boss.mode", to_string(cfg.boss.mode)));
  cfg.boss.delta_mode =
      delta_mode_from_string(r.str("boss.delta_mode", to_string(cfg.boss.delta_mode)));
  cfg.boss.phi_grad_mode =
      phi_grad_mode_from_string(r.str("boss.phi_grad_mode", to_string(cfg.boss.phi_grad_mode)));
  cfg.boss.phi_epochs = static_cast<int>(r.num("boss.phi_epochs", cfg.boss.phi_epochs));
  cfg.boss.fit_batch = static_cast<std::size_t>(r.num("boss.fit_batch", 0));
  cfg.search.k = static_cast<std::size_t>(r.num("search.k", cfg.search.k));
  cfg.search.steps = static_cast<int>(r.num("search.steps", cfg.search.steps));
  cfg.search.step_size = r.num("search.step_size", 0.0);
  r.finish();
  cfg.validate();
  return cfg;
}

SearchConfig search_config_for(const TaskSpec& task, const RunConfig& cfg) {
  SearchConfig s = cfg.search;
  s.clip_box = task.box;
  return s;
}

SeedOutcome run_seed(const TaskSpec& task, const OfflineDataset& train,
                     const OfflineDataset& holdout, const RunConfig& cfg, std::uint64_t seed) {
  const MlpSpec spec = cfg.mlp_spec(task.d);
  const SearchConfig scfg = search_config_for(task, cfg);

  SeedOutcome out;
  out.seed = seed;
  if (cfg.method == "ga") {
    BossConfig bc = cfg.boss;
    bc.seed = seed;
    const SurrogateParams phi0 = init_params_centered(spec, SeededRng(seed).fork("init"), train);
    BossResult r = boss_train(train, spec, bc, phi0);
    out.trace = std::move(r.trace);
    out.candidates = ga_search(r.params, scfg, train);
    out.rmse = rmse_ood(r.params, holdout);
  } else {
    const SeededRng member_root = SeededRng(seed).fork("member");
    std::vector<SurrogateParams> members;
    double rmse_acc = 0.0;
    for (int i = 0; i < cfg.ensemble; ++i) {
      const std::uint64_t mseed = member_root.fork(static_cast<std::uint64_t>(i)).seed();
      BossConfig bc = cfg.boss;
      bc.seed = mseed;
      const SurrogateParams phi0 =
          init_params_centered(spec, SeededRng(mseed).fork("init"), train);
      BossResult r = boss_train(train, spec, bc, phi0);
      if (i == 0) out.trace = std::move(r.trace);
      rmse_acc += rmse_ood(r.params, holdout);
      members.push_back(std::move(r.params));
    }
    out.rmse = rmse_acc / static_cast<double>(cfg.ensemble);
    out.candidates = ensemble_search(
        members, cfg.method == "ens-min" ? EnsembleMode::Min : EnsembleMode::Mean, scfg, train);
  }
  out.report = score_candidates(task, out.candidates);
  out.report.seed = seed;
  return out;
}

RunOutputs run_all(const TaskSpec& task, const OfflineDataset& train,
                   const OfflineDataset& holdout, const RunConfig& cfg) {
  RunOutputs out;
  out.data_hash = dataset_hash(train);
  std::vector<PercentileReport> reports;
  std::vector<double> rmses;
  for (std::uint64_t seed : cfg.seeds) {
    try {
      out.outcomes.push_back(run_seed(task, train, holdout, cfg, seed));
    } catch (const std::exception& e) {
      out.failures.push_back({seed, e.what()});
      continue;
    }
    reports.push_back(out.outcomes.back().report);
    rmses.push_back(out.outcomes.back().rmse);
  }
  BOSSOPT_REQUIRE(!reports.empty(), "run_all: every seed failed");
  out.agg = aggregate(reports, rmses);
  return out;
}

std::string results_csv(const RunConfig& cfg, const RunOutputs& outputs) {
  std::ostringstream os;
  os << "task,method,regularizer,seed,p50,p75,p100,rmse_ood\n";
  for (const auto& oc : outputs.outcomes) {
    os << cfg.task << ',' << cfg.method << ',' << to_string(cfg.boss.mode) << ',' << oc.seed
       << ',' << format_double(oc.report.p50) << ',' << format_double(oc.report.p75) << ','
       << format_double(oc.report.p100) << ',' << format_double(oc.rmse) << '\n';
  }
  return os.str();
}

std::string aggregate_csv(const RunConfig& cfg, const RunOutputs& outputs) {
  std::ostringstream os;
  const AggregateReport& a = outputs.agg;
  os << "task,method,regularizer,stat,p50,p75,p100,rmse_ood,n_seeds\n";
  os << cfg.task << ',' << cfg.method << ',' << to_string(cfg.boss.mode) << ",mean,"
     << format_double(a.mean_p50) << ',' << format_double(a.mean_p75) << ','
     << format_double(a.mean_p100) << ',' << format_double(a.mean_rmse) << ',' << a.n_seeds
     << '\n';
  os << cfg.task << ',' << cfg.method << ',' << to_string(cfg.boss.mode) << ",std,"
     << format_double(a.std_p50) << ',' << format_double(a.std_p75) << ','
     << format_double(a.std_p100) << ',' << format_double(a.std_rmse) << ',' << a.n_seeds
     << '\n';
  return os.str();
}

std::string manifest_json(const RunConfig& cfg, const RunOutputs& outputs) {
  json j;
  j["tool"] = "bossopt";
  j["version"] = kToolVersion;
  j["config"] = json::object();
  for (const auto& [k, v] : cfg.to_map()) j["config"][k] = v;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(outputs.data_hash));
  j["dataset_hash"] = hash;
  j["outputs"] = {"results.csv", "aggregate.csv"};
  return j.dump(2) + "\n";
}

RunConfig config_from_manifest_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  BOSSOPT_REQUIRE(j.contains("config"), "manifest: missing config object");
  FlatConfig map;
  for (const auto& [k, v] : j.at("config").items()) map[k] = v.get<std::string>();
  return RunConfig::from_map(map);
}

void write_run_artifacts(const std::string& dir, const RunConfig& cfg,
                         const RunOutputs& outputs, bool force) {
  fs::create_directories(dir);
  const fs::path base(dir);
  BOSSOPT_REQUIRE(force || !fs::exists(base / "results.csv"),
                  "output directory already holds results.csv (use --force)");
  write_text_file((base / "results.csv").string(), results_csv(cfg, outputs));
  write_text_file((base / "aggregate.csv").string(), aggregate_csv(cfg, outputs));
  write_text_file((base / "manifest.json").string(), manifest_json(cfg, outputs));
  for (const auto& oc : outputs.outcomes) {
    std::ostringstream trace_os;
    oc.trace.write_csv(trace_os);
    write_text_file((base / ("trace_seed" + std::to_string(oc.seed) + ".csv")).string(),
                    trace_os.str());
    std::ostringstream cand_os;
    oc.candidates.write_csv(cand_os);
    write_text_file((base / ("candidates_seed" + std::to_string(oc.seed) + ".csv")).string(),
                    cand_os.str());
  }
}

}  // namespace bossopt
