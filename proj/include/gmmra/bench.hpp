#pragma once

// Seeded Monte-Carlo trial grids over SNR, comparing estimators on shared data.
//
// Config files are flat `key = value` lines; `#` starts a comment. Keys:
//
//   L, N, n_trials               integers
//   snr_grid                     comma list, or log:<lo>:<hi>:<count>
//   noise                        homoscedastic | heteroscedastic
//   sigma2                       fixed noise level; replaces the SNR grid
//   p_out                        outlier probability (0 disables outliers)
//   outlier_scale                Sigma_out = outlier_scale / (L * snr) * I
//   sigma2_out                   fixed outlier variance instead of outlier_scale
//   projection_K                 keep the first K entries (0 = no projection)
//   estimators                   comma list of ls, gmm, gm, gmm_m3
//   moments                      2 or 3 (order used by ls, gmm, gm)
//   starts, max_iter             integers
//   g_tol, x_tol, ridge          reals
//   lad_steps                    integer >= 1
//   models                       heuristic study: comma list of noise kinds
//   master_seed, threads         integers
//   output, summary              file paths
//   timing                       true | false (runtime_ms is 0 when false)

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gmmra/errors.hpp"
#include "gmmra/estimators.hpp"
#include "gmmra/metrics.hpp"
#include "gmmra/moment_engine.hpp"
#include "gmmra/mra_model.hpp"
#include "gmmra/rng.hpp"

namespace gmmra {

struct ExperimentConfig {
  int L = 15;
  int N = 50000;
  int n_trials = 20;
  std::vector<double> snr_grid;
  NoiseKind noise = NoiseKind::Homoscedastic;
  std::optional<double> sigma2;
  double p_out = 0.0;
  double outlier_scale = 100.0;
  std::optional<double> sigma2_out;
  int projection_K = 0;
  std::vector<std::string> estimators{"ls", "gmm"};
  int moments = 2;
  int starts = 5;
  int max_iter = 2000;
  double g_tol = 1e-8;
  double x_tol = 1e-10;
  double ridge = 0.0;
  int lad_steps = 2;
  std::vector<NoiseKind> models{NoiseKind::Homoscedastic, NoiseKind::Heteroscedastic};
  std::uint64_t master_seed = 1;
  int threads = 1;
  std::string output = "trials.csv";
  std::string summary = "summary.csv";
  bool timing = false;

  ExperimentConfig() : snr_grid(log_grid(0.05, 50.0, 7)) {}

  static std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> g;
    if (count == 1) return {lo};
    for (int i = 0; i < count; ++i)
      g.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (count - 1)));
    return g;
  }

  /// SNR values of the grid, or the single SNR implied by a fixed sigma2.
  std::vector<double> effective_grid() const {
    if (!sigma2) return snr_grid;
    const double tr = noise_trace(base_model(*sigma2), L);
    return {tr > 0.0 ? 1.0 / tr : std::numeric_limits<double>::infinity()};
  }

  NoiseModel base_model(double s2) const {
    return noise == NoiseKind::Homoscedastic ? NoiseModel::homoscedastic(s2) : NoiseModel::heteroscedastic(s2);
  }

  /// Full noise model at one grid point.
  NoiseModel model_at(double snr) const {
    NoiseModel m = base_model(sigma2 ? *sigma2 : sigma_from_snr(snr, noise, L));
    if (p_out > 0.0) m = m.with_outliers(p_out, sigma2_out ? *sigma2_out : outlier_scale / (L * snr));
    if (projection_K > 0) m = m.projected(projection_K);
    return m;
  }

  EstimatorConfig estimator_config(std::uint64_t seed, int order) const {
    EstimatorConfig c;
    c.moments_order = order;
    c.starts = starts;
    c.optimizer = {g_tol, x_tol, max_iter};
    c.ridge_rel = ridge;
    c.lad_steps = lad_steps;
    c.seed = seed;
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (L < 2) fail("L must be at least 2");
    if (N < 1) fail("N must be at least 1");
    if (n_trials < 1) fail("n_trials must be at least 1");
    if (snr_grid.empty()) fail("snr_grid is empty");
    for (double s : snr_grid)
      if (!(s > 0.0) || !std::isfinite(s)) fail("snr_grid values must be positive");
    if (sigma2 && !(*sigma2 >= 0.0)) fail("sigma2 must be non-negative");
    if (!(p_out >= 0.0 && p_out <= 1.0)) fail("p_out must lie in [0, 1]");
    if (!(outlier_scale >= 0.0)) fail("outlier_scale must be non-negative");
    if (projection_K < 0 || projection_K > L) fail("projection_K must lie in [0, L]");
    if (estimators.empty()) fail("estimators is empty");
    const bool plain = p_out == 0.0 && projection_K == 0;
    for (const auto& e : estimators) {
      if (e != "ls" && e != "gmm" && e != "gm" && e != "gmm_m3") fail("unknown estimator '" + e + "'");
      if (e == "gmm_m3" && !plain) fail("gmm_m3 needs plain Gaussian noise (no outliers, no projection)");
    }
    if (moments != 2 && moments != 3) fail("moments must be 2 or 3");
    if (moments == 3 && !plain) fail("moments = 3 needs plain Gaussian noise (no outliers, no projection)");
    if (starts < 1) fail("starts must be at least 1");
    if (max_iter < 1) fail("max_iter must be at least 1");
    if (!(g_tol > 0.0) || !(x_tol > 0.0)) fail("tolerances must be positive");
    if (!(ridge >= 0.0)) fail("ridge must be non-negative");
    if (lad_steps < 1) fail("lad_steps must be at least 1");
    if (threads < 1) fail("threads must be at least 1");
    if (models.empty()) fail("models is empty");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline NoiseKind parse_kind(const std::string& v) {
  if (v == "homoscedastic") return NoiseKind::Homoscedastic;
  if (v == "heteroscedastic") return NoiseKind::Heteroscedastic;
  throw std::invalid_argument("expected homoscedastic or heteroscedastic");
}

inline double parse_real(const std::string& v) {
  std::size_t used = 0;
  const double d = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}

inline long long parse_int(const std::string& v) {
  std::size_t used = 0;
  const long long i = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return i;
}

inline std::vector<double> parse_grid(const std::string& v) {
  if (v.rfind("log:", 0) == 0) {
    const auto parts = split_list([&] {
      std::string s = v.substr(4);
      std::replace(s.begin(), s.end(), ':', ',');
      return s;
    }());
    if (parts.size() != 3) throw std::invalid_argument("expected log:<lo>:<hi>:<count>");
    const long long n = parse_int(parts[2]);
    if (n < 1) throw std::invalid_argument("grid count must be positive");
    return ExperimentConfig::log_grid(parse_real(parts[0]), parse_real(parts[1]), static_cast<int>(n));
  }
  std::vector<double> g;
  for (const auto& p : split_list(v)) g.push_back(parse_real(p));
  return g;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false");
}

}  // namespace detail

/// Parses a config; errors name the source, line and key.
inline ExperimentConfig parse_config(std::istream& is, const std::string& source = "<config>") {
  ExperimentConfig c;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    if (val.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    auto as_int = [&] { return static_cast<int>(detail::parse_int(val)); };
    try {
      if (key == "L") c.L = as_int();
      else if (key == "N") c.N = as_int();
      else if (key == "n_trials") c.n_trials = as_int();
      else if (key == "snr_grid") c.snr_grid = detail::parse_grid(val);
      else if (key == "noise") c.noise = detail::parse_kind(val);
      else if (key == "sigma2") c.sigma2 = detail::parse_real(val);
      else if (key == "p_out") c.p_out = detail::parse_real(val);
      else if (key == "outlier_scale") c.outlier_scale = detail::parse_real(val);
      else if (key == "sigma2_out") c.sigma2_out = detail::parse_real(val);
      else if (key == "projection_K") c.projection_K = as_int();
      else if (key == "estimators") c.estimators = detail::split_list(val);
      else if (key == "moments") c.moments = as_int();
      else if (key == "starts") c.starts = as_int();
      else if (key == "max_iter") c.max_iter = as_int();
      else if (key == "g_tol") c.g_tol = detail::parse_real(val);
      else if (key == "x_tol") c.x_tol = detail::parse_real(val);
      else if (key == "ridge") c.ridge = detail::parse_real(val);
      else if (key == "lad_steps") c.lad_steps = as_int();
      else if (key == "models") {
        c.models.clear();
        for (const auto& m : detail::split_list(val)) c.models.push_back(detail::parse_kind(m));
      }
      else if (key == "master_seed") c.master_seed = static_cast<std::uint64_t>(detail::parse_int(val));
      else if (key == "threads") c.threads = as_int();
      else if (key == "output") c.output = val;
      else if (key == "summary") c.summary = val;
      else if (key == "timing") c.timing = detail::parse_bool(val);
      else throw ConfigError(where + ": unknown key '" + key + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
    }
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  return parse_config(is, path);
}

// ---------------------------------------------------------------------------
// Trials.

/// FNV-1a over the little-endian bytes of the row-major payload.
inline std::uint64_t data_hash(const RowMatrix& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    std::uint64_t bits;
    const double v = data.data()[i];
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Trial {
  int snr_index = 0;
  int trial = 0;
  double snr = 0.0;
  std::uint64_t seed = 0;
  NoiseModel model;
  ObservationSet obs;
};

// Sub-streams of a trial seed.
enum : std::uint64_t { kSignalStream = 1, kDistStream = 2, kDataStream = 3, kEstimatorStream = 4 };

inline std::uint64_t trial_seed(std::uint64_t master, int snr_index, int trial) {
  return hash_key({master, static_cast<std::uint64_t>(snr_index), static_cast<std::uint64_t>(trial)});
}

/// Draws x ~ N(0, I) normalized, rho uniform on the simplex, then N observations.
inline Trial make_trial(const ExperimentConfig& c, int snr_index, int trial, std::optional<int> N = std::nullopt) {
  const auto grid = c.effective_grid();
  Trial t;
  t.snr_index = snr_index;
  t.trial = trial;
  t.snr = grid.at(static_cast<std::size_t>(snr_index));
  t.seed = trial_seed(c.master_seed, snr_index, trial);
  t.model = c.model_at(t.snr);
  const Signal x = random_signal(c.L, hash_key({t.seed, kSignalStream}));
  const auto rho = random_simplex(c.L, hash_key({t.seed, kDistStream}));
  t.obs = generate_observations(x, rho, t.model, N.value_or(c.N), hash_key({t.seed, kDataStream}));
  return t;
}

struct TrialRecord {
  int trial_id = 0;
  double snr = 0.0;
  std::string estimator;
  double relative_error = std::numeric_limits<double>::quiet_NaN();
  double rho_error = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  double cond_S = std::numeric_limits<double>::quiet_NaN();
  double delta_W = std::numeric_limits<double>::quiet_NaN();
  double runtime_ms = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t hash = 0;
  std::string failure;  // empty on success

  bool ok() const noexcept { return failure.empty(); }
};

struct EstimatorRun {
  EstimationResult result;
  double cond_S = std::numeric_limits<double>::quiet_NaN();
  double delta_W = std::numeric_limits<double>::quiet_NaN();
};

/// Runs one named estimator on an observation set.
inline EstimatorRun run_estimator(const std::string& name, const ObservationSet& obs, const NoiseModel& model,
                                  int L, const ExperimentConfig& c, std::uint64_t seed) {
  if (name == "ls") return {ls_estimate(obs, model, L, c.estimator_config(seed, c.moments))};
  if (name == "gm") return {gm_estimate(obs, model, L, c.estimator_config(seed, c.moments)).result};
  if (name == "gmm" || name == "gmm_m3") {
    auto out = gmm_estimate(obs, model, L, c.estimator_config(seed, name == "gmm" ? c.moments : 3));
    EstimatorRun run{std::move(out.result), out.weighting.condition_number, std::numeric_limits<double>::quiet_NaN()};
    run.delta_W = geodesic_distance(out.weighting.matrix);
    return run;
  }
  throw ParameterError("unknown estimator '" + name + "'");
}

inline std::vector<TrialRecord> run_trial(const ExperimentConfig& c, int snr_index, int trial) {
  const Trial t = make_trial(c, snr_index, trial);
  const OrbitPoint truth{t.obs.truth->signal, t.obs.truth->distribution};
  const std::uint64_t h = data_hash(t.obs.data);
  const int trial_id = snr_index * c.n_trials + trial;
  std::vector<TrialRecord> rows;
  for (const auto& name : c.estimators) {
    TrialRecord r;
    r.trial_id = trial_id;
    r.snr = t.snr;
    r.estimator = name;
    r.seed = t.seed;
    r.hash = h;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const EstimatorRun run = run_estimator(name, t.obs, t.model, c.L, c, hash_key({t.seed, kEstimatorStream}));
      const OrbitError e = joint_orbit_error(truth, run.result.orbit_point());
      r.relative_error = e.signal_error;
      r.rho_error = e.rho_error;
      r.objective = run.result.objective;
      r.cond_S = run.cond_S;
      r.delta_W = run.delta_W;
    } catch (const Error& e) {
      r.failure = e.what();
    }
    if (c.timing)
      r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Runs job(i) for i in [0, n) on `threads` workers pulling from a shared counter.
template <typename Job>
void parallel_for(int n, int threads, Job&& job) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex err_mu;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct BenchmarkResult {
  std::vector<TrialRecord> rows;  // canonical (snr, trial, estimator) order
  int trials = 0;
  int failed_trials = 0;          // trials in which every estimator failed

  bool all_failed() const noexcept { return trials > 0 && failed_trials == trials; }
};

inline BenchmarkResult run_benchmark(const ExperimentConfig& c) {
  c.validate();
  const int n_snr = static_cast<int>(c.effective_grid().size());
  const int total = n_snr * c.n_trials;
  std::vector<std::vector<TrialRecord>> per(total);
  parallel_for(total, c.threads, [&](int i) { per[i] = run_trial(c, i / c.n_trials, i % c.n_trials); });
  BenchmarkResult out;
  out.trials = total;
  for (auto& rows : per) {
    if (std::none_of(rows.begin(), rows.end(), [](const TrialRecord& r) { return r.ok(); })) ++out.failed_trials;
    for (auto& r : rows) out.rows.push_back(std::move(r));
  }
  return out;
}

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kTrialHeader =
    "trial_id,snr,estimator,relative_error,rho_error,objective,cond_S,delta_W,runtime_ms,seed,data_hash";

inline void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& rows) {
  os << kTrialHeader << '\n';
  for (const auto& r : rows) {
    os << r.trial_id << ',' << format_real(r.snr) << ',' << r.estimator << ',' << format_real(r.relative_error)
       << ',' << format_real(r.rho_error) << ',' << format_real(r.objective) << ',' << format_real(r.cond_S) << ','
       << format_real(r.delta_W) << ',' << format_real(r.runtime_ms) << ',' << r.seed << ',' << hex64(r.hash)
       << '\n';
  }
  if (!os) throw IoError("failed writing trial CSV");
}

// ---------------------------------------------------------------------------
// Summary of error ratios.

struct RatioStats {
  double snr = 0.0;
  std::string numerator, denominator;
  int count = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double p25 = std::numeric_limits<double>::quiet_NaN();
  double p75 = std::numeric_limits<double>::quiet_NaN();
};

/// Linear-interpolation percentile (p in [0, 1]) of a sorted sample.
inline double percentile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline RatioStats ratio_stats(std::vector<double> r) {
  RatioStats s;
  std::sort(r.begin(), r.end());
  s.count = static_cast<int>(r.size());
  if (r.empty()) return s;
  double sum = 0.0;
  for (double v : r) sum += v;
  s.mean = sum / static_cast<double>(r.size());
  s.median = percentile_sorted(r, 0.5);
  s.p25 = percentile_sorted(r, 0.25);
  s.p75 = percentile_sorted(r, 0.75);
  return s;
}

/// Per-trial ratios error(num) / error(den) at one SNR; trials where either failed are skipped.
inline std::vector<double> error_ratios(const std::vector<TrialRecord>& rows, double snr, const std::string& num,
                                        const std::string& den) {
  std::map<int, std::pair<double, double>> by_trial;
  for (const auto& r : rows) {
    if (r.snr != snr) continue;
    auto& slot = by_trial.try_emplace(r.trial_id, std::numeric_limits<double>::quiet_NaN(),
                                      std::numeric_limits<double>::quiet_NaN())
                     .first->second;
    if (r.estimator == num) slot.first = r.relative_error;
    if (r.estimator == den) slot.second = r.relative_error;
  }
  std::vector<double> out;
  for (const auto& [id, p] : by_trial)
    if (std::isfinite(p.first) && std::isfinite(p.second) && p.second > 0.0) out.push_back(p.first / p.second);
  return out;
}

inline std::vector<RatioStats> summarize(const std::vector<TrialRecord>& rows) {
  static const std::pair<const char*, const char*> kPairs[] = {{"ls", "gmm"}, {"gmm", "gm"}, {"gmm", "gmm_m3"}};
  std::vector<double> snrs;
  std::set<std::string> names;
  for (const auto& r : rows) {
    if (std::find(snrs.begin(), snrs.end(), r.snr) == snrs.end()) snrs.push_back(r.snr);
    names.insert(r.estimator);
  }
  std::vector<RatioStats> out;
  for (double snr : snrs) {
    for (const auto& [num, den] : kPairs) {
      if (!names.count(num) || !names.count(den)) continue;
      RatioStats s = ratio_stats(error_ratios(rows, snr, num, den));
      s.snr = snr;
      s.numerator = num;
      s.denominator = den;
      out.push_back(std::move(s));
    }
  }
  return out;
}

inline void write_summary_csv(std::ostream& os, const std::vector<RatioStats>& stats) {
  os << "snr,ratio,count,mean,median,p25,p75\n";
  for (const auto& s : stats)
    os << format_real(s.snr) << ',' << s.numerator << '/' << s.denominator << ',' << s.count << ','
       << format_real(s.mean) << ',' << format_real(s.median) << ',' << format_real(s.p25) << ','
       << format_real(s.p75) << '\n';
  if (!os) throw IoError("failed writing summary CSV");
}

// ---------------------------------------------------------------------------
// Weighting-matrix heuristic study.

struct HeuristicRow {
  double snr = 0.0;
  NoiseKind model = NoiseKind::Homoscedastic;
  double delta_W = 0.0;  // averaged over trials
  double cond = 0.0;     // averaged over trials
  int trials = 0;
};

inline const char* kind_name(NoiseKind k) {
  return k == NoiseKind::Homoscedastic ? "homoscedastic" : "heteroscedastic";
}

/// delta(W) and cond(S) of W = (S + ridge)^-1 from simulated data at each (snr, model).
inline std::vector<HeuristicRow> run_heuristic_study(const ExperimentConfig& c) {
  c.validate();
  const auto grid = c.snr_grid;
  const int n_models = static_cast<int>(c.models.size());
  const int cells = static_cast<int>(grid.size()) * n_models;
  const int total = cells * c.n_trials;
  std::vector<std::pair<double, double>> vals(total);
  parallel_for(total, c.threads, [&](int i) {
    const int cell = i / c.n_trials;
    const int trial = i % c.n_trials;
    const int snr_index = cell / n_models;
    ExperimentConfig cm = c;
    cm.noise = c.models[cell % n_models];
    cm.sigma2.reset();
    const Trial t = make_trial(cm, snr_index, trial);
    const MomentIndexMap map(t.model.observation_dim(c.L), c.moments);
    const auto S = empirical_covariance(t.obs, map);
    const auto W = build_weighting(S, c.ridge);
    vals[i] = {geodesic_distance(W.matrix), W.condition_number};
  });
  std::vector<HeuristicRow> out;
  for (int cell = 0; cell < cells; ++cell) {
    HeuristicRow r;
    r.snr = grid[cell / n_models];
    r.model = c.models[cell % n_models];
    r.trials = c.n_trials;
    for (int t = 0; t < c.n_trials; ++t) {
      r.delta_W += vals[cell * c.n_trials + t].first;
      r.cond += vals[cell * c.n_trials + t].second;
    }
    r.delta_W /= c.n_trials;
    r.cond /= c.n_trials;
    out.push_back(r);
  }
  return out;
}

inline void write_heuristic_csv(std::ostream& os, const std::vector<HeuristicRow>& rows) {
  os << "snr,model,delta_W,cond\n";
  for (const auto& r : rows)
    os << format_real(r.snr) << ',' << kind_name(r.model) << ',' << format_real(r.delta_W) << ','
       << format_real(r.cond) << '\n';
  if (!os) throw IoError("failed writing heuristic CSV");
}

}  // namespace gmmra
