// mra_gmm: simulate MRA data, inspect moments, run estimators and benchmark grids.
//
// Exit codes: 0 success, 1 runtime error, 2 usage or config error,
// 3 every benchmark trial failed numerically.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "gmmra/gmmra.hpp"

using namespace gmmra;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> moments;
  std::optional<double> ridge;
  std::optional<int> threads;
};

void add_common(CLI::App* sub, Common& c, bool needs_out) {
  sub->add_option("--config", c.config, "experiment config file")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "overrides master_seed");
  auto* o = sub->add_option("--out", c.out, "output path");
  if (needs_out) o->required();
  sub->add_option("--moments", c.moments, "moment order")->check(CLI::IsMember({2, 3}));
  sub->add_option("--ridge", c.ridge, "relative ridge added to S before inversion")->check(CLI::NonNegativeNumber);
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.master_seed = *c.seed;
  if (c.moments) cfg.moments = *c.moments;
  if (c.ridge) cfg.ridge = *c.ridge;
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  return cfg;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

template <typename F>
void write_file(const std::string& path, F&& body) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  body(os);
}

int cmd_simulate(const Common& c, int snr_index, int trial) {
  const ExperimentConfig cfg = load(c);
  const Trial t = make_trial(cfg, snr_index, trial);
  save_observations(c.out, t.obs.data, t.model.tag());
  json j{{"file", c.out},
         {"N", t.obs.count()},
         {"dim", t.obs.dim()},
         {"snr", num(t.snr)},
         {"model_tag", t.model.tag()},
         {"trial_seed", t.seed},
         {"data_hash", hex64(data_hash(t.obs.data))},
         {"signal", vec(t.obs.truth->signal.values())},
         {"distribution", vec(t.obs.truth->distribution.probs())}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

ObservationSet load_data(const std::string& path, const NoiseModel& model, int L) {
  ObservationFile f = load_observations(path);
  if (f.model_tag != 0xFFFFFFFFu && f.model_tag != model.tag())
    throw ConfigError(path + ": file was written for a different noise model (tag " + std::to_string(f.model_tag) +
                      ", config gives " + std::to_string(model.tag()) + ")");
  if (f.data.cols() != model.observation_dim(L))
    throw ConfigError(path + ": observation dimension does not match L / projection_K in the config");
  return ObservationSet{std::move(f.data), model, 0, std::nullopt};
}

int cmd_moments(const Common& c, const std::string& data, int snr_index) {
  const ExperimentConfig cfg = load(c);
  const NoiseModel model = cfg.model_at(cfg.effective_grid().at(snr_index));
  const ObservationSet obs = load_data(data, model, cfg.L);
  const MomentIndexMap map(obs.dim(), cfg.moments);
  const MomentSummary s = accumulate_moments(obs.data, map, {.with_covariance = obs.count() >= 2, .threads = cfg.threads});
  json j{{"N", obs.count()}, {"q", map.size()}, {"order", cfg.moments}};
  if (!c.out.empty()) {
    write_file(c.out + ".moments.csv", [&](std::ostream& os) { write_moments_csv(os, s.moments); });
    j["moments_csv"] = c.out + ".moments.csv";
  }
  if (s.covariance) {
    const DiagnosticReport rep = condition_report(s.covariance->matrix);
    j["cond_S"] = num(rep.condition_number);
    j["delta_S"] = num(rep.geodesic_distance);
    j["min_eigenvalue"] = rep.min_eigenvalue;
    j["max_eigenvalue"] = rep.max_eigenvalue;
    if (!c.out.empty()) {
      write_file(c.out + ".covariance.csv", [&](std::ostream& os) { write_covariance_csv(os, *s.covariance, map); });
      j["covariance_csv"] = c.out + ".covariance.csv";
    }
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_estimate(const Common& c, const std::string& data, int snr_index, int trial,
                 const std::vector<std::string>& only) {
  ExperimentConfig cfg = load(c);
  if (!only.empty()) {
    cfg.estimators = only;
    cfg.validate();
  }
  const NoiseModel model = cfg.model_at(cfg.effective_grid().at(snr_index));
  const ObservationSet obs = load_data(data, model, cfg.L);
  const std::uint64_t seed = hash_key({trial_seed(cfg.master_seed, snr_index, trial), kEstimatorStream});
  json j{{"data_hash", hex64(data_hash(obs.data))}, {"estimator_seed", seed}, {"results", json::array()}};
  for (const auto& name : cfg.estimators) {
    json r{{"estimator", name}};
    try {
      const EstimatorRun run = run_estimator(name, obs, model, cfg.L, cfg, seed);
      r["signal"] = vec(run.result.signal.values());
      r["distribution"] = vec(run.result.distribution.probs());
      r["objective"] = num(run.result.objective);
      r["converged"] = run.result.converged;
      r["iterations"] = run.result.iterations;
      r["starts_tried"] = run.result.starts_tried;
      r["best_start"] = run.result.best_start;
      r["cond_S"] = num(run.cond_S);
      r["delta_W"] = num(run.delta_W);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      r["error"] = e.what();
    }
    j["results"].push_back(std::move(r));
  }
  if (!c.out.empty())
    write_file(c.out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  else
    std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_benchmark(const Common& c, const std::string& summary) {
  ExperimentConfig cfg = load(c);
  if (!c.out.empty()) cfg.output = c.out;
  if (!summary.empty()) cfg.summary = summary;
  const BenchmarkResult res = run_benchmark(cfg);
  write_file(cfg.output, [&](std::ostream& os) { write_trials_csv(os, res.rows); });
  write_file(cfg.summary, [&](std::ostream& os) { write_summary_csv(os, summarize(res.rows)); });
  int failed_rows = 0;
  for (const auto& r : res.rows)
    if (!r.ok()) {
      ++failed_rows;
      std::cerr << "trial " << r.trial_id << " " << r.estimator << ": " << r.failure << '\n';
    }
  std::cerr << res.rows.size() << " rows, " << failed_rows << " failed; wrote " << cfg.output << " and "
            << cfg.summary << '\n';
  return res.all_failed() ? 3 : 0;
}

int cmd_heuristic(const Common& c) {
  ExperimentConfig cfg = load(c);
  const std::string out = c.out.empty() ? cfg.output : c.out;
  const auto rows = run_heuristic_study(cfg);
  write_file(out, [&](std::ostream& os) { write_heuristic_csv(os, rows); });
  std::cerr << rows.size() << " rows; wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized method of moments for multi-reference alignment"};
  app.require_subcommand(1);

  Common sim, mom, est, bench, heur;
  int sim_snr = 0, sim_trial = 0, mom_snr = 0, est_snr = 0, est_trial = 0;
  std::string mom_data, est_data, summary;
  std::vector<std::string> only;

  auto* s = app.add_subcommand("simulate", "draw one trial's observations and write them to --out");
  add_common(s, sim, true);
  s->add_option("--snr-index", sim_snr, "grid point")->check(CLI::NonNegativeNumber);
  s->add_option("--trial", sim_trial, "trial index")->check(CLI::NonNegativeNumber);

  auto* m = app.add_subcommand("moments", "empirical moments and covariance diagnostics of a data file");
  add_common(m, mom, false);
  m->add_option("--data", mom_data, "observation file (.csv or binary)")->required()->check(CLI::ExistingFile);
  m->add_option("--snr-index", mom_snr, "grid point that defines the noise model")->check(CLI::NonNegativeNumber);

  auto* e = app.add_subcommand("estimate", "run estimators on one data file");
  add_common(e, est, false);
  e->add_option("--data", est_data, "observation file (.csv or binary)")->required()->check(CLI::ExistingFile);
  e->add_option("--snr-index", est_snr, "grid point that defines the noise model")->check(CLI::NonNegativeNumber);
  e->add_option("--trial", est_trial, "trial index used to derive the estimator seed")
      ->check(CLI::NonNegativeNumber);
  e->add_option("--estimator", only, "subset of estimators to run");

  auto* b = app.add_subcommand("benchmark", "run the trial grid; writes trial and summary CSVs");
  add_common(b, bench, false);
  b->add_option("--summary", summary, "summary CSV path");

  auto* h = app.add_subcommand("heuristic", "geodesic distance and condition number of W over the SNR grid");
  add_common(h, heur, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*s) return cmd_simulate(sim, sim_snr, sim_trial);
    if (*m) return cmd_moments(mom, mom_data, mom_snr);
    if (*e) return cmd_estimate(est, est_data, est_snr, est_trial, only);
    if (*b) return cmd_benchmark(bench, summary);
    if (*h) return cmd_heuristic(heur);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const std::out_of_range&) {
    std::cerr << "config error: --snr-index is outside the SNR grid\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
