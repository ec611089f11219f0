#pragma once

#include <pbrc/belief.hpp>
#include <pbrc/contract.hpp>
#include <pbrc/evidence.hpp>
#include <pbrc/jsonio.hpp>
#include <pbrc/network.hpp>
#include <pbrc/rng.hpp>
#include <pbrc/router.hpp>
#include <pbrc/trigger.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace pbrc {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct LengthMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inverse standard normal CDF, Acklam's rational approximation. Absolute
// error below 1.2e-9 over (0,1), which is far tighter than any interval
// reported here.
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("norm_quantile: p must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Wilson score interval for a binomial proportion.
inline std::pair<double, double> wilson_ci(long successes, long n, double level = 0.95) {
  if (n < 1) throw std::invalid_argument("wilson_ci: n must be at least 1");
  if (successes < 0 || successes > n) {
    throw std::invalid_argument("wilson_ci: successes must lie in [0, n]");
  }
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("wilson_ci: level must be in (0,1)");
  const double z = norm_quantile(0.5 + level / 2.0);
  const double nn = static_cast<double>(n);
  const double ph = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (ph + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(ph * (1.0 - ph) / nn + z2 / (4.0 * nn * nn));
  // clamp so the point estimate always lies inside despite rounding at the
  // boundaries (s = 0, s = n)
  const double lo = std::min(std::max(0.0, center - half), ph);
  const double hi = std::max(std::min(1.0, center + half), ph);
  return {lo, hi};
}

struct FlipCounts {
  long harmful = 0;
  long beneficial = 0;
  long neutral = 0;

  bool operator==(const FlipCounts&) const = default;
};

// Answer vectors hold hypothesis indices; a flip is any change of answer
// between the independent baseline and the social outcome.
inline FlipCounts flip_stats(const std::vector<int>& raw, const std::vector<int>& social,
                             const std::vector<int>& truth) {
  if (raw.size() != social.size() || raw.size() != truth.size()) {
    throw LengthMismatch("flip_stats: answer vectors differ in length");
  }
  FlipCounts out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == social[i]) continue;
    const bool was_right = raw[i] == truth[i];
    const bool is_right = social[i] == truth[i];
    if (was_right && !is_right) {
      ++out.harmful;
    } else if (!was_right && is_right) {
      ++out.beneficial;
    } else {
      ++out.neutral;
    }
  }
  return out;
}

inline Belief sharpen(const Belief& b, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("sharpen: gamma must be positive");
  }
  std::vector<double> w(b.size());
  for (std::size_t h = 0; h < b.size(); ++h) w[h] = std::pow(b[h], gamma);
  return Belief(std::move(w));
}

// One synchronous round of neighbor pooling: each agent takes the arithmetic
// mean of its neighborhood (itself included), mixes geometrically with weight
// w_i = min(0.95, w0 + ws * deg/(n-1)), then sharpens.
inline std::vector<Belief> social_pool_sharpen(const std::vector<Belief>& beliefs, const Graph& g,
                                               double w0, double ws, double gamma) {
  if (static_cast<int>(beliefs.size()) != g.n) {
    throw std::invalid_argument("social_pool_sharpen: one belief per agent required");
  }
  const std::size_t m = beliefs.empty() ? 0 : beliefs[0].size();
  for (const auto& b : beliefs) {
    if (b.size() != m) throw SpaceMismatch("social_pool_sharpen: mixed belief dimensions");
  }
  std::vector<Belief> next;
  next.reserve(beliefs.size());
  for (int i = 0; i < g.n; ++i) {
    std::vector<double> s(m, 0.0);
    for (int j : g.out[i]) {
      for (std::size_t h = 0; h < m; ++h) s[h] += beliefs[j][h];
    }
    for (std::size_t h = 0; h < m; ++h) s[h] += beliefs[i][h];
    const double hood = static_cast<double>(g.out[i].size() + 1);
    for (auto& x : s) x /= hood;
    const double frac =
        g.n > 1 ? static_cast<double>(g.out[i].size()) / static_cast<double>(g.n - 1) : 0.0;
    const double w = std::min(0.95, w0 + ws * frac);
    std::vector<double> mixed(m);
    for (std::size_t h = 0; h < m; ++h) {
      mixed[h] = std::pow(beliefs[i][h], 1.0 - w) * std::pow(s[h], w);
    }
    next.push_back(sharpen(Belief(std::move(mixed)), gamma));
  }
  return next;
}

// ---------------------------------------------------------------------------
// configuration

struct SimConfig {
  std::string sim_id = "I";
  int n = 20;
  int T = 10;
  int trials = 500;
  std::string topology = "all";
  double topology_p = 0.3;
  std::uint64_t seed = 42;
  double w0 = 0.4;
  double ws = 0.5;
  double gamma = 2.0;
  double lambda = 0.1;
  std::vector<double> lambdas{0.0, 0.02, 0.05, 0.1, 0.2, 0.4};
  std::vector<double> q_values{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<double> epsilons{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<int> k_values{1, 3, 5};
  int token_count = 99;
  double rho = 0.2;
  double evidence_step = 2.0;
  double evidence_cap = 10.0;
  double baseline_evidence_step = 1.0;
  double cascade_conf_threshold = 0.9;
  int max_rounds = 500;
  int jobs = 1;
};

inline const std::vector<std::string>& known_sim_ids() {
  static const std::vector<std::string> ids{"I", "Ib", "II", "III", "IV", "V", "VI"};
  return ids;
}

inline SimConfig default_config(const std::string& sim_id) {
  const auto& ids = known_sim_ids();
  if (std::find(ids.begin(), ids.end(), sim_id) == ids.end()) {
    throw ConfigError("unknown simulation id: " + sim_id);
  }
  SimConfig c;
  c.sim_id = sim_id;
  if (sim_id == "II") {
    c.trials = 2000;
    c.n = 1;
    c.T = 1;
  } else if (sim_id == "III") {
    c.trials = 30;
  } else if (sim_id == "IV") {
    c.trials = 10000;
    c.n = 1;
    c.T = 1;
  } else if (sim_id == "V") {
    c.trials = 10000;
    c.n = 1;
    c.T = 1;
  } else if (sim_id == "VI") {
    c.n = 25;
    c.T = 8;
    c.trials = 400;
    c.topology = "er";
    c.topology_p = 0.15;
  }
  return c;
}

inline void validate_config(const SimConfig& c) {
  const auto bad = [](const std::string& what) { throw ConfigError("bad config: " + what); };
  const auto& ids = known_sim_ids();
  if (std::find(ids.begin(), ids.end(), c.sim_id) == ids.end()) bad("sim_id " + c.sim_id);
  if (c.n < 1) bad("n must be positive");
  if (c.T < 0) bad("T must be nonnegative");
  if (c.trials < 1) bad("trials must be positive");
  static const std::set<std::string> topos{"all", "ring", "er", "complete", "star", "grid"};
  if (!topos.count(c.topology)) bad("topology " + c.topology);
  if (!(c.topology_p > 0.0 && c.topology_p <= 1.0)) bad("topology_p outside (0,1]");
  if (c.w0 < 0.0 || !std::isfinite(c.w0)) bad("w0");
  if (c.ws < 0.0 || !std::isfinite(c.ws)) bad("ws");
  if (!(c.gamma > 0.0) || !std::isfinite(c.gamma)) bad("gamma must be positive");
  if (!(c.lambda >= 0.0 && c.lambda < 1.0)) bad("lambda outside [0,1)");
  if (c.lambdas.empty()) bad("empty lambda sweep");
  for (double l : c.lambdas) {
    if (!(l >= 0.0 && l < 1.0)) bad("sweep lambda outside [0,1)");
  }
  if (c.q_values.empty()) bad("empty q grid");
  for (double q : c.q_values) {
    if (!(q >= 0.0 && q < 1.0)) bad("q outside [0,1)");
  }
  if (c.epsilons.empty()) bad("empty epsilon grid");
  for (double e : c.epsilons) {
    if (!(e >= 0.0 && e <= 1.0)) bad("epsilon outside [0,1]");
  }
  if (c.k_values.empty()) bad("empty witness-count grid");
  for (int k : c.k_values) {
    if (k < 1) bad("witness count must be at least 1");
  }
  if (c.token_count < 1) bad("token_count must be positive");
  if (!(c.rho > 0.0 && c.rho <= 1.0)) bad("rho outside (0,1]");
  if (!std::isfinite(c.evidence_step)) bad("evidence_step");
  if (!(c.evidence_cap > 0.0) || !std::isfinite(c.evidence_cap)) bad("evidence_cap");
  if (!std::isfinite(c.baseline_evidence_step)) bad("baseline_evidence_step");
  if (!(c.cascade_conf_threshold > 0.0 && c.cascade_conf_threshold <= 1.0)) {
    bad("cascade_conf_threshold outside (0,1]");
  }
  if (c.max_rounds < 1) bad("max_rounds must be positive");
  if (c.jobs < 1) bad("jobs must be positive");
}

inline json config_to_json(const SimConfig& c) {
  return json{{"sim_id", c.sim_id},
              {"n", c.n},
              {"T", c.T},
              {"trials", c.trials},
              {"topology", c.topology},
              {"topology_p", c.topology_p},
              {"seed", c.seed},
              {"w0", c.w0},
              {"ws", c.ws},
              {"gamma", c.gamma},
              {"lambda", c.lambda},
              {"lambdas", c.lambdas},
              {"q_values", c.q_values},
              {"epsilons", c.epsilons},
              {"k_values", c.k_values},
              {"token_count", c.token_count},
              {"rho", c.rho},
              {"evidence_step", c.evidence_step},
              {"evidence_cap", c.evidence_cap},
              {"baseline_evidence_step", c.baseline_evidence_step},
              {"cascade_conf_threshold", c.cascade_conf_threshold},
              {"max_rounds", c.max_rounds},
              {"jobs", c.jobs}};
}

// Missing keys keep the values already in `c`, so config files may be
// partial overlays on top of any base (generic or per-sim defaults).
inline SimConfig config_from_json(const json& j, SimConfig c) {
  const auto grab = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  grab("sim_id", c.sim_id);
  grab("n", c.n);
  grab("T", c.T);
  grab("trials", c.trials);
  grab("topology", c.topology);
  grab("topology_p", c.topology_p);
  grab("seed", c.seed);
  grab("w0", c.w0);
  grab("ws", c.ws);
  grab("gamma", c.gamma);
  grab("lambda", c.lambda);
  grab("lambdas", c.lambdas);
  grab("q_values", c.q_values);
  grab("epsilons", c.epsilons);
  grab("k_values", c.k_values);
  grab("token_count", c.token_count);
  grab("rho", c.rho);
  grab("evidence_step", c.evidence_step);
  grab("evidence_cap", c.evidence_cap);
  grab("baseline_evidence_step", c.baseline_evidence_step);
  grab("cascade_conf_threshold", c.cascade_conf_threshold);
  grab("max_rounds", c.max_rounds);
  grab("jobs", c.jobs);
  return c;
}

inline SimConfig config_from_json(const json& j) { return config_from_json(j, SimConfig{}); }

// ---------------------------------------------------------------------------
// metrics

struct MetricRow {
  std::string condition;
  long trials = 0;
  double cascade_rate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double mean_conf_T = 0.0;
  double mean_ptrue_T = 0.0;
  double accuracy_T = 0.0;
  long harmful = 0;
  long beneficial = 0;
  long neutral = 0;
  double mean_cost = 0.0;
  double aux = 0.0;
};

struct TrajectoryRow {
  std::string condition;
  int t = 0;
  double mean_ptrue = 0.0;
  double mean_conf = 0.0;
  double accuracy = 0.0;
};

struct SimMetrics {
  std::string sim_id;
  std::vector<MetricRow> rows;
  std::vector<TrajectoryRow> trajectories;
  std::vector<std::string> raw;  // "condition,trial,v1,v2,v3,v4" per trial
};

namespace detail {

inline std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string fmt_raw(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string raw_line(const std::string& cond, long trial, double v1, double v2, double v3,
                            double v4) {
  return cond + "," + std::to_string(trial) + "," + fmt_raw(v1) + "," + fmt_raw(v2) + "," +
         fmt_raw(v3) + "," + fmt_raw(v4);
}

}  // namespace detail

inline std::string metrics_csv(const SimMetrics& m) {
  std::string out =
      "condition,trials,cascade_rate,ci_lo,ci_hi,mean_conf_T,mean_ptrue_T,accuracy_T,"
      "harmful,beneficial,neutral,mean_cost,aux\n";
  for (const auto& r : m.rows) {
    out += r.condition + "," + std::to_string(r.trials) + "," + detail::fmt_g(r.cascade_rate) +
           "," + detail::fmt_g(r.ci_lo) + "," + detail::fmt_g(r.ci_hi) + "," +
           detail::fmt_g(r.mean_conf_T) + "," + detail::fmt_g(r.mean_ptrue_T) + "," +
           detail::fmt_g(r.accuracy_T) + "," + std::to_string(r.harmful) + "," +
           std::to_string(r.beneficial) + "," + std::to_string(r.neutral) + "," +
           detail::fmt_g(r.mean_cost) + "," + detail::fmt_g(r.aux) + "\n";
  }
  return out;
}

inline std::string trajectories_csv(const SimMetrics& m) {
  std::string out = "condition,t,mean_ptrue,mean_conf,accuracy\n";
  for (const auto& r : m.trajectories) {
    out += r.condition + "," + std::to_string(r.t) + "," + detail::fmt_g(r.mean_ptrue) + "," +
           detail::fmt_g(r.mean_conf) + "," + detail::fmt_g(r.accuracy) + "\n";
  }
  return out;
}

inline std::string raw_csv(const SimMetrics& m) {
  std::string out = "condition,trial,v1,v2,v3,v4\n";
  for (const auto& line : m.raw) {
    out += line;
    out += "\n";
  }
  return out;
}

inline json manifest_json(const SimConfig& c) {
  return json{{"sim_id", c.sim_id},
              {"seed", c.seed},
              {"config", config_to_json(c)},
              {"outputs", json::array({"metrics.csv", "trajectories.csv"})}};
}

// ---------------------------------------------------------------------------
// contract builders

// "at least k distinct valid tokens supporting hyp", the workhorse trigger of
// the evidential fragment.
inline Trigger k_supporters_trigger(const std::string& name, const std::string& hyp, int k) {
  if (k < 1) throw ConfigError("witness count must be at least 1");
  Trigger t;
  t.name = name;
  for (int i = 0; i < k; ++i) {
    const std::string v = "x" + std::to_string(i);
    t.vars.push_back(v);
    t.atoms.push_back(atom_valid(v));
    t.atoms.push_back(atom_supports(v, hyp));
  }
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      t.atoms.push_back(atom_distinct("x" + std::to_string(i), "x" + std::to_string(j)));
    }
  }
  return t;
}

// Evidential two-clause contract used in the token-empty arms: without valid
// tokens nothing ever fires and every round is the fallback.
inline Contract token_empty_guard(double lambda) {
  Contract c;
  c.name = "token-empty-guard";
  c.hypotheses = HypothesisSpace({"h0", "h1"});
  c.clauses.push_back({k_supporters_trigger("supported_h0", "h0", 1), op_log_odds("h0", 2.0, 10.0)});
  c.clauses.push_back({k_supporters_trigger("supported_h1", "h1", 1), op_log_odds("h1", 2.0, 10.0)});
  c.fallback = lambda == 0.0 ? op_identity() : op_dilute(lambda);
  return c;
}

// k-witness revision contract. The clause pushing against h1 outranks the one
// pushing toward it, the same contradicts-before-supports precedence the
// triage contract uses, so label noise is felt rather than masked.
inline Contract k_witness_contract(int k, double lambda, double step, double cap) {
  Contract c;
  c.name = "k-witness";
  c.hypotheses = HypothesisSpace({"h0", "h1"});
  c.clauses.push_back({k_supporters_trigger("k_against", "h0", k), op_log_odds("h0", step, cap)});
  c.clauses.push_back({k_supporters_trigger("k_for", "h1", k), op_log_odds("h1", step, cap)});
  c.fallback = lambda == 0.0 ? op_identity() : op_dilute(lambda);
  return c;
}

// ---------------------------------------------------------------------------
// shared run machinery

// Audit-grade capture of one enforced run: everything needed to re-verify,
// re-attribute or abstract it afterwards.
struct RunCapture {
  Contract contract;
  ValidityConfig validity;
  std::vector<std::string> agents;
  std::vector<AuditLog> logs;
  std::vector<std::vector<Event>> events;
};

namespace detail {

inline ValidityConfig sim_validity() {
  ValidityConfig cfg;
  cfg.secret_key = "sim-secret";
  return cfg;
}

inline Token supporter_token(const std::string& id, const std::string& hyp, std::int64_t issued,
                             const std::string& secret) {
  TokenSpec spec;
  spec.id = id;
  spec.schema = "ToolResult";
  spec.payload_digest = "payload:" + id;
  spec.issued_at = issued;
  spec.support_labels[hyp] = SupportLabel::supports;
  return mint_token(spec, secret, {"v0"});
}

inline Token plain_token(const std::string& id, std::int64_t issued, const std::string& secret) {
  TokenSpec spec;
  spec.id = id;
  spec.schema = "ToolResult";
  spec.payload_digest = "payload:" + id;
  spec.issued_at = issued;
  return mint_token(spec, secret, {"v0"});
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t idx) {
  std::uint64_t s = master ^ (0x2545f4914f6cdd1dULL * (idx + 1));
  splitmix64_next(s);
  return splitmix64_next(s);
}

// Fixed stream indices per condition family, stable under topology filters.
inline std::uint64_t family_index(const std::string& topo) {
  if (topo == "ring") return 0;
  if (topo == "er") return 1;
  if (topo == "complete") return 2;
  if (topo == "star") return 3;
  if (topo == "grid") return 4;
  throw ConfigError("unknown topology: " + topo);
}

inline std::pair<int, int> grid_dims(int n) {
  int rows = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  while (rows > 1 && n % rows != 0) --rows;
  return {rows, n / rows};
}

inline Graph build_topology(const std::string& fam, int n, double p, Xoshiro256ss& rng) {
  if (fam == "ring") return ring(n);
  if (fam == "complete") return complete(n);
  if (fam == "star") return star(n);
  if (fam == "grid") {
    const auto [r, c] = grid_dims(n);
    return grid(r, c);
  }
  if (fam == "er") return connected_erdos_renyi(n, p, rng);
  throw ConfigError("unknown topology: " + fam);
}

template <typename F>
inline void for_each_trial(int trials, int jobs, F&& body) {
  if (jobs <= 1 || trials <= 1) {
    for (int t = 0; t < trials; ++t) body(t);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= trials) return;
      try {
        body(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min(jobs, trials);
  pool.reserve(workers);
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// Per-arm, per-trial bookkeeping shared by the opinion-dynamics sims.
struct ArmStats {
  bool cascade = false;
  bool pre_evidence_cascade = false;
  double conf_T = 0.0;
  double ptrue_T = 0.0;
  double acc_T = 0.0;
  double cost = 0.0;  // total validity checks spent
  std::vector<double> traj_pt, traj_cf, traj_acc;
  FlipCounts flips;
};

inline void record_state(const std::vector<Belief>& bs, int truth, ArmStats& a) {
  double pt = 0.0, cf = 0.0, ac = 0.0;
  for (const auto& b : bs) {
    pt += b[truth];
    cf += conf(b);
    const auto am = argmax_set(b);
    if (am.size() == 1 && static_cast<int>(am[0]) == truth) ac += 1.0;
  }
  const double n = static_cast<double>(bs.size());
  a.traj_pt.push_back(pt / n);
  a.traj_cf.push_back(cf / n);
  a.traj_acc.push_back(ac / n);
}

inline bool all_wrong_and_sure(const std::vector<Belief>& bs, int truth, double threshold) {
  for (const auto& b : bs) {
    const auto am = argmax_set(b);
    const bool truth_on_top = std::find(am.begin(), am.end(), static_cast<std::size_t>(truth)) !=
                              am.end();
    if (truth_on_top || conf(b) < threshold) return false;
  }
  return !bs.empty();
}

inline std::vector<int> answers_of(const std::vector<Belief>& bs) {
  std::vector<int> out;
  out.reserve(bs.size());
  for (const auto& b : bs) out.push_back(static_cast<int>(argmax_set(b)[0]));
  return out;
}

inline void finish_arm(const std::vector<Belief>& bs, int truth, double threshold,
                       const std::vector<int>& raw_answers, ArmStats& a) {
  a.cascade = all_wrong_and_sure(bs, truth, threshold);
  a.conf_T = a.traj_cf.back();
  a.ptrue_T = a.traj_pt.back();
  a.acc_T = a.traj_acc.back();
  a.flips = flip_stats(raw_answers, answers_of(bs), std::vector<int>(bs.size(), truth));
}

inline std::vector<std::string> agent_names(int n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (int i = 0; i < n; ++i) names.push_back("a" + std::to_string(i));
  return names;
}

// Token-free gossip event: every in-neighbor sends persuasion and a
// confidence claim, nothing verifiable.
inline Event social_event(const std::vector<std::string>& names, const Graph& g,
                          const std::vector<Belief>& bs, int i, std::int64_t round) {
  Event e;
  e.receiver = names[i];
  e.round = round;
  e.messages.reserve(g.in[i].size());
  for (int j : g.in[i]) {
    Message msg;
    msg.sender = names[j];
    msg.recipients = {names[i]};
    msg.sent_at = round;
    msg.rhetoric = "everyone I trust already agrees";
    msg.confidence_claim = conf(bs[j]);
    e.messages.push_back(std::move(msg));
  }
  return e;
}

// The enforced arm of a token-empty trial: every agent steps through the
// guard contract each round; with no tokens anywhere every step is fallback.
inline ArmStats enforced_token_empty_arm(const SimConfig& cfg, const Graph& g,
                                         const std::vector<std::string>& names,
                                         const std::vector<Belief>& init, double lambda,
                                         Xoshiro256ss& rng, RunCapture* capture) {
  const Contract contract = token_empty_guard(lambda);
  const ValidityConfig vcfg = sim_validity();
  const RouterConfig rc;
  ArmStats arm;
  std::vector<Belief> bs = init;
  record_state(bs, 0, arm);
  if (capture) {
    capture->contract = contract;
    capture->validity = vcfg;
    capture->agents = names;
    capture->logs.clear();
    capture->events.assign(names.size(), {});
    for (std::size_t i = 0; i < names.size(); ++i) {
      capture->logs.push_back(audit_init(names[i], init[i], 0));
    }
  }
  for (int t = 0; t < cfg.T; ++t) {
    std::vector<Belief> next;
    next.reserve(bs.size());
    for (int i = 0; i < g.n; ++i) {
      const Event e = social_event(names, g, bs, i, t);
      const StepOutcome out = enforced_step(contract, rc, bs[i], e, vcfg, rng);
      arm.cost += out.validations;
      if (capture) {
        append_step(capture->logs[i], t, names[i], e, vcfg, out);
        capture->events[i].push_back(e);
      }
      next.push_back(out.belief);
    }
    bs = std::move(next);
    record_state(bs, 0, arm);
  }
  finish_arm(bs, 0, cfg.cascade_conf_threshold, answers_of(init), arm);
  return arm;
}

struct TokenEmptyTrial {
  ArmStats baseline;
  std::vector<ArmStats> enforced;  // one per requested lambda
};

inline TokenEmptyTrial token_empty_trial(const SimConfig& cfg, const std::string& topo,
                                         const std::vector<double>& lambdas,
                                         std::uint64_t stream_seed, std::uint64_t trial,
                                         bool run_baseline, RunCapture* capture) {
  auto rng = Xoshiro256ss::for_trial(stream_seed, trial);
  const Graph g = build_topology(topo, cfg.n, cfg.topology_p, rng);
  std::vector<Belief> init;
  init.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    const double p0 = rng.beta(5.0, 5.0);
    init.push_back(Belief({p0, 1.0 - p0}));
  }
  const auto names = agent_names(cfg.n);
  const std::vector<int> raw = answers_of(init);

  TokenEmptyTrial out;
  if (run_baseline) {
    std::vector<Belief> bs = init;
    record_state(bs, 0, out.baseline);
    for (int t = 0; t < cfg.T; ++t) {
      bs = social_pool_sharpen(bs, g, cfg.w0, cfg.ws, cfg.gamma);
      record_state(bs, 0, out.baseline);
    }
    finish_arm(bs, 0, cfg.cascade_conf_threshold, raw, out.baseline);
  }
  for (double lam : lambdas) {
    out.enforced.push_back(enforced_token_empty_arm(cfg, g, names, init, lam, rng, capture));
  }
  return out;
}

// Aggregation of per-trial arm stats into one metrics row plus trajectory.
inline void fold_arm(const std::string& cond, const std::vector<ArmStats>& per_trial, int n_agents,
                     int steps_per_trial, SimMetrics& m) {
  MetricRow row;
  row.condition = cond;
  row.trials = static_cast<long>(per_trial.size());
  const std::size_t points = per_trial.empty() ? 0 : per_trial[0].traj_pt.size();
  std::vector<double> tr_pt(points, 0.0), tr_cf(points, 0.0), tr_ac(points, 0.0);
  long cascades = 0;
  long pre_ev = 0;
  double cost = 0.0;
  for (const auto& a : per_trial) {
    cascades += a.cascade ? 1 : 0;
    pre_ev += a.pre_evidence_cascade ? 1 : 0;
    row.mean_conf_T += a.conf_T;
    row.mean_ptrue_T += a.ptrue_T;
    row.accuracy_T += a.acc_T;
    row.harmful += a.flips.harmful;
    row.beneficial += a.flips.beneficial;
    row.neutral += a.flips.neutral;
    cost += a.cost;
    for (std::size_t t = 0; t < points; ++t) {
      tr_pt[t] += a.traj_pt[t];
      tr_cf[t] += a.traj_cf[t];
      tr_ac[t] += a.traj_acc[t];
    }
  }
  const double nt = static_cast<double>(per_trial.size());
  row.cascade_rate = cascades / nt;
  const auto ci = wilson_ci(cascades, static_cast<long>(per_trial.size()));
  row.ci_lo = ci.first;
  row.ci_hi = ci.second;
  row.mean_conf_T /= nt;
  row.mean_ptrue_T /= nt;
  row.accuracy_T /= nt;
  const double denom = nt * std::max(1, n_agents) * std::max(1, steps_per_trial);
  row.mean_cost = cost / denom;
  row.aux = pre_ev / nt;
  m.rows.push_back(row);
  for (std::size_t t = 0; t < points; ++t) {
    m.trajectories.push_back(
        {cond, static_cast<int>(t), tr_pt[t] / nt, tr_cf[t] / nt, tr_ac[t] / nt});
  }
  for (std::size_t t = 0; t < per_trial.size(); ++t) {
    const auto& a = per_trial[t];
    m.raw.push_back(raw_line(cond, static_cast<long>(t), a.cascade ? 1.0 : 0.0, a.conf_T,
                             a.ptrue_T, a.acc_T));
  }
}

inline std::vector<std::string> topology_list(const SimConfig& cfg,
                                              const std::vector<std::string>& all_of_them) {
  if (cfg.topology == "all") return all_of_them;
  return {cfg.topology};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sim I and Ib: token-empty deliberation, pooling baseline vs enforced guard

namespace detail {

inline SimMetrics run_sim_i(const SimConfig& cfg) {
  SimMetrics m;
  m.sim_id = "I";
  for (const std::string& topo : topology_list(cfg, {"ring", "er", "complete"})) {
    const std::uint64_t stream = substream_seed(cfg.seed, family_index(topo));
    std::vector<TokenEmptyTrial> results(cfg.trials);
    for_each_trial(cfg.trials, cfg.jobs, [&](int t) {
      results[t] = token_empty_trial(cfg, topo, {cfg.lambda}, stream, t, true, nullptr);
    });
    std::vector<ArmStats> base, enforced;
    base.reserve(results.size());
    enforced.reserve(results.size());
    for (auto& r : results) {
      base.push_back(std::move(r.baseline));
      enforced.push_back(std::move(r.enforced[0]));
    }
    fold_arm("I:" + topo + ":baseline", base, cfg.n, cfg.T, m);
    fold_arm("I:" + topo + ":pbrc", enforced, cfg.n, cfg.T, m);
  }
  return m;
}

inline SimMetrics run_sim_ib(const SimConfig& cfg) {
  SimMetrics m;
  m.sim_id = "Ib";
  for (const std::string& topo : topology_list(cfg, {"ring", "er", "complete"})) {
    const std::uint64_t stream = substream_seed(cfg.seed, family_index(topo));
    std::vector<TokenEmptyTrial> results(cfg.trials);
    for_each_trial(cfg.trials, cfg.jobs, [&](int t) {
      results[t] = token_empty_trial(cfg, topo, cfg.lambdas, stream, t, true, nullptr);
    });
    std::vector<ArmStats> base;
    base.reserve(results.size());
    for (auto& r : results) base.push_back(std::move(r.baseline));
    fold_arm("Ib:" + topo + ":baseline", base, cfg.n, cfg.T, m);
    for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
      std::vector<ArmStats> arm;
      arm.reserve(results.size());
      for (auto& r : results) arm.push_back(std::move(r.enforced[li]));
      std::ostringstream cond;
      cond << "Ib:" << topo << ":lambda=" << cfg.lambdas[li];
      fold_arm(cond.str(), arm, cfg.n, cfg.T, m);
    }
  }
  return m;
}

}  // namespace detail

// One enforced token-empty run with its full audit trail, drawn from exactly
// the stream run_sim would use for this topology and trial.
inline RunCapture captured_token_empty_run(const SimConfig& cfg, const std::string& topology,
                                           std::uint64_t trial) {
  validate_config(cfg);
  RunCapture cap;
  const std::uint64_t stream = detail::substream_seed(cfg.seed, detail::family_index(topology));
  detail::token_empty_trial(cfg, topology, {cfg.lambda}, stream, trial, false, &cap);
  return cap;
}

// The pooling baseline replayed under a pseudo-contract whose single always-on
// clause certifies every step without a witness. This is the unenforced run
// shape that audit attribution and the stability invariant reject.
inline RunCapture captured_baseline_run(const SimConfig& cfg, const std::string& topology,
                                        std::uint64_t trial) {
  validate_config(cfg);
  const std::uint64_t stream = detail::substream_seed(cfg.seed, detail::family_index(topology));
  auto rng = Xoshiro256ss::for_trial(stream, trial);
  const Graph g = detail::build_topology(topology, cfg.n, cfg.topology_p, rng);
  std::vector<Belief> bs;
  bs.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    const double p0 = rng.beta(5.0, 5.0);
    bs.push_back(Belief({p0, 1.0 - p0}));
  }
  RunCapture cap;
  Trigger always;
  always.name = "social_update";
  cap.contract.name = "ungated-pooling";
  cap.contract.hypotheses = HypothesisSpace({"h0", "h1"});
  cap.contract.clauses.push_back({always, op_identity()});
  cap.contract.fallback = op_identity();
  cap.validity = detail::sim_validity();
  cap.agents = detail::agent_names(cfg.n);
  cap.events.assign(cfg.n, {});
  for (int i = 0; i < cfg.n; ++i) cap.logs.push_back(audit_init(cap.agents[i], bs[i], 0));
  for (int t = 0; t < cfg.T; ++t) {
    const std::vector<Belief> before = bs;
    bs = social_pool_sharpen(bs, g, cfg.w0, cfg.ws, cfg.gamma);
    for (int i = 0; i < cfg.n; ++i) {
      const Event e = detail::social_event(cap.agents, g, before, i, t);
      const StepOutcome out{bs[i], Certificate{"social_update", {}}, true, 0, std::nullopt, 0};
      append_step(cap.logs[i], t, cap.agents[i], e, cap.validity, out);
      cap.events[i].push_back(e);
    }
  }
  return cap;
}

// ---------------------------------------------------------------------------
// Sim II: token-equivalent events with varied rhetoric

namespace detail {

inline Contract invariance_contract() {
  Contract c;
  c.name = "token-invariant-pair";
  c.hypotheses = HypothesisSpace({"h0", "h1"});
  c.clauses.push_back({k_supporters_trigger("supported_h0", "h0", 1), op_log_odds("h0", 1.5, 8.0)});
  c.clauses.push_back({k_supporters_trigger("supported_h1", "h1", 1), op_log_odds("h1", 1.5, 8.0)});
  c.fallback = op_dilute(0.1);
  return c;
}

// Package the same tokens into a fresh rhetorical wrapping: new partition into
// messages, new senders, new persuasion text, new confidence claims.
inline Event rhetorical_wrap(std::vector<Token> toks, std::int64_t round, Xoshiro256ss& rng) {
  static const char* kLines[] = {
      "this settles it",
      "I am absolutely certain now",
      "sources close to the matter agree",
      "think about what happens if you are wrong",
  };
  Event e;
  e.receiver = "me";
  e.round = round;
  rng.shuffle(toks);
  const std::size_t parts = 1 + rng.uniform_int(3);
  std::vector<Message> msgs(parts);
  for (auto& msg : msgs) {
    msg.sender = "voice" + std::to_string(rng.uniform_int(50));
    msg.recipients = {"me"};
    msg.sent_at = round;
    msg.rhetoric = kLines[rng.uniform_int(4)];
    if (rng.bernoulli(0.5)) msg.confidence_claim = rng.uniform01();
  }
  for (std::size_t i = 0; i < toks.size(); ++i) {
    msgs[rng.uniform_int(parts)].tokens.push_back(std::move(toks[i]));
  }
  e.messages = std::move(msgs);
  return e;
}

struct PairOut {
  bool mismatch = false;
  int checks_a = 0;
  int checks_b = 0;
};

inline PairOut sim_ii_pair(std::uint64_t stream, std::uint64_t trial) {
  auto rng = Xoshiro256ss::for_trial(stream, trial);
  const ValidityConfig vcfg = sim_validity();
  const Contract contract = invariance_contract();
  const double p = rng.beta(2.0, 2.0);
  const Belief b({p, 1.0 - p});

  std::vector<Token> shared;
  const std::size_t k = rng.uniform_int(4);
  for (std::size_t i = 0; i < k; ++i) {
    const std::string id = "t" + std::to_string(trial) + "_" + std::to_string(i);
    const std::uint64_t kind = rng.uniform_int(3);
    if (kind == 2) {
      shared.push_back(plain_token(id, static_cast<std::int64_t>(rng.uniform_int(3)),
                                   vcfg.secret_key));
    } else {
      shared.push_back(supporter_token(id, kind == 0 ? "h0" : "h1",
                                       static_cast<std::int64_t>(rng.uniform_int(3)),
                                       vcfg.secret_key));
    }
  }
  // invalid extras differ between the two events; they are not part of the
  // validated token set and so must not matter
  std::vector<Token> ta = shared, tb = shared;
  if (rng.bernoulli(0.5)) {
    ta.push_back(supporter_token("junkA" + std::to_string(trial), "h1", 0, "forged-key"));
  }
  if (rng.bernoulli(0.5)) {
    tb.push_back(supporter_token("junkB" + std::to_string(trial), "h0", 0, "forged-key"));
  }
  const Event ea = rhetorical_wrap(std::move(ta), 3, rng);
  const Event eb = rhetorical_wrap(std::move(tb), 3, rng);

  const RouterConfig rc;
  const StepOutcome oa = enforced_step(contract, rc, b, ea, vcfg, rng);
  const StepOutcome ob = enforced_step(contract, rc, b, eb, vcfg, rng);
  PairOut out;
  out.checks_a = oa.validations;
  out.checks_b = ob.validations;
  out.mismatch = oa.belief.weights() != ob.belief.weights() ||
                 oa.certificate.label != ob.certificate.label ||
                 oa.certificate.witness != ob.certificate.witness || oa.accepted != ob.accepted;
  return out;
}

inline SimMetrics run_sim_ii(const SimConfig& cfg) {
  SimMetrics m;
  m.sim_id = "II";
  const std::uint64_t stream = substream_seed(cfg.seed, 10);
  std::vector<PairOut> results(cfg.trials);
  for_each_trial(cfg.trials, cfg.jobs, [&](int t) { results[t] = sim_ii_pair(stream, t); });
  MetricRow row;
  row.condition = "II:invariant";
  row.trials = cfg.trials;
  long mism = 0;
  double cost = 0.0;
  for (std::size_t t = 0; t < results.size(); ++t) {
    const auto& r = results[t];
    mism += r.mismatch ? 1 : 0;
    cost += r.checks_a + r.checks_b;
    m.raw.push_back(raw_line("II:invariant", static_cast<long>(t), r.mismatch ? 1.0 : 0.0,
                             r.checks_a, r.checks_b, 0.0));
  }
  row.cascade_rate = static_cast<double>(mism) / cfg.trials;
  const auto ci = wilson_ci(mism, cfg.trials);
  row.ci_lo = ci.first;
  row.ci_hi = ci.second;
  row.mean_cost = cost / (2.0 * cfg.trials);
  row.aux = static_cast<double>(mism);
  m.rows.push_back(row);
  return m;
}

}  // namespace detail

// A contract that reads the sender line is exactly what the enforced update
// is supposed to be blind to; this exhibits the mismatch such a contract
// produces on a token-equivalent pair.
inline bool sender_sensitivity_mismatch(std::uint64_t seed) {
  auto rng = Xoshiro256ss(seed);
  const ValidityConfig vcfg = detail::sim_validity();
  Contract c;
  c.name = "sender-gated";
  c.hypotheses = HypothesisSpace({"h0", "h1"});
  Trigger t;
  t.name = "from_alice";
  t.vars = {"x"};
  t.atoms = {atom_valid("x"), atom_supports("x", "h1"), atom_sender_is("x", "alice")};
  c.clauses.push_back({t, op_log_odds("h1", 2.0, 8.0)});
  c.fallback = op_dilute(0.1);

  const Token tok = detail::supporter_token("fact", "h1", 0, vcfg.secret_key);
  const Belief b({0.5, 0.5});
  const RouterConfig rc;
  Event ea;
  ea.receiver = "me";
  ea.round = 0;
  ea.messages.push_back({"alice", {"me"}, 0, {tok}, "as discussed", std::nullopt});
  Event eb = ea;
  eb.messages[0].sender = "bob";
  const StepOutcome oa = enforced_step(c, rc, b, ea, vcfg, rng);
  const StepOutcome ob = enforced_step(c, rc, b, eb, vcfg, rng);
  return oa.belief.weights() != ob.belief.weights() ||
         oa.certificate.label != ob.certificate.label;
}

// ---------------------------------------------------------------------------
// Sim III: flooding closure vs graph diameter

namespace detail {

inline SimMetrics run_sim_iii(const SimConfig& cfg) {
  SimMetrics m;
  m.sim_id = "III";
  for (const std::string& fam : topology_list(cfg, {"ring", "er", "complete", "star", "grid"})) {
    const bool sampled = fam == "er";
    const int instances = sampled ? cfg.trials : 1;
    const std::uint64_t stream = substream_seed(cfg.seed, 20 + family_index(fam));
    long matches = 0;
    double closure_sum = 0.0, diam_sum = 0.0;
    const std::string cond = "III:" + fam;
    for (int t = 0; t < instances; ++t) {
      auto rng = Xoshiro256ss::for_trial(stream, t);
      const Graph g = build_topology(fam, cfg.n, cfg.topology_p, rng);
      const auto ct = closure_time(g, unique_placement(g));
      const auto dm = diameter(g);
      if (!ct || !dm) throw std::logic_error("connected instance produced no closure/diameter");
      const bool match = *ct == *dm;
      matches += match ? 1 : 0;
      closure_sum += *ct;
      diam_sum += *dm;
      m.raw.push_back(raw_line(cond, t, *ct, *dm, match ? 1.0 : 0.0, 0.0));
    }
    MetricRow row;
    row.condition = cond;
    row.trials = instances;
    row.cascade_rate = static_cast<double>(matches) / instances;
    const auto ci = wilson_ci(matches, instances);
    row.ci_lo = ci.first;
    row.ci_hi = ci.second;
    row.mean_cost = closure_sum / instances;
    row.aux = diam_sum / instances;
    m.rows.push_back(row);
  }
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sim IV: sound-but-incomplete recognition and adoption delay

namespace detail {

struct AdoptionOut {
  int round = 0;
  int safety_violations = 0;
  bool capped = false;
};

inline Contract adoption_contract(double lambda) {
  Contract c;
  c.name = "single-supporter";
  c.hypotheses = HypothesisSpace({"h0", "h1"});
  c.clauses.push_back({k_supporters_trigger("supported_h1", "h1", 1), op_log_odds("h1", 2.0, 10.0)});
  c.fallback = op_dilute(lambda);
  return c;
}

inline AdoptionOut sim_iv_trial(const SimConfig& cfg, const Contract& contract, const Token& tok,
                                const ValidityConfig& vcfg, double q, std::uint64_t stream,
                                std::uint64_t trial) {
  auto rng = Xoshiro256ss::for_trial(stream, trial);
  RouterConfig rc;
  rc.completeness_probability = 1.0 - q;
  Belief b({0.7, 0.3});
  AdoptionOut out;
  const std::vector<std::size_t> truth_top{1};
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    Event e;
    e.receiver = "agent";
    e.round = round;
    e.messages.push_back({"tool", {"agent"}, round, {tok}, "", std::nullopt});
    const StepOutcome step = enforced_step(contract, rc, b, e, vcfg, rng);
    if (argmax_set(step.belief) != argmax_set(b) && step.certificate.witness.empty()) {
      ++out.safety_violations;
    }
    b = step.belief;
    if (argmax_set(b) == truth_top) {
      out.round = round;
      return out;
    }
  }
  out.round = cfg.max_rounds;
  out.capped = true;
  return out;
}

inline SimMetrics run_sim_iv(const SimConfig& cfg) {
  SimMetrics m;
  m.sim_id = "IV";
  const ValidityConfig vcfg = sim_validity();
  const Contract contract = adoption_contract(cfg.lambda);
  const Token tok = supporter_token("ev", "h1", 0, vcfg.secret_key);
  for (std::size_t qi = 0; qi < cfg.q_values.size(); ++qi) {
    const double q = cfg.q_values[qi];
    const std::uint64_t stream = substream_seed(cfg.seed, 30 + qi);
    std::vector<AdoptionOut> results(cfg.trials);
    for_each_trial(cfg.trials, cfg.jobs, [&](int t) {
      results[t] = sim_iv_trial(cfg, contract, tok, vcfg, q, stream, t);
    });
    std::ostringstream cond;
    cond << "IV:q=" << q;
    MetricRow row;
    row.condition = cond.str();
    row.trials = cfg.trials;
    long unsafe = 0, capped = 0;
    double rounds = 0.0;
    for (std::size_t t = 0; t < results.size(); ++t) {
      const auto& r = results[t];
      unsafe += r.safety_violations > 0 ? 1 : 0;
      capped += r.capped ? 1 : 0;
      rounds += r.round;
      m.raw.push_back(raw_line(cond.str(), static_cast<long>(t), r.round, r.safety_violations,
                               r.capped ? 1.0 : 0.0, 0.0));
    }
    row.cascade_rate = static_cast<double>(unsafe) / cfg.trials;
    const auto ci = wilson_ci(unsafe, cfg.trials);
    row.ci_lo = ci.first;
    row.ci_hi = ci.second;
    row.mean_cost = rounds / cfg.trials;
    row.accuracy_T = static_cast<double>(cfg.trials - capped) / cfg.trials;
    row.aux = static_cast<double>(capped) / cfg.trials;
    m.rows.push_back(row);
  }
  return m;
}

}  // namespace detail

// One incomplete-recognition run with its audit trail.
inline RunCapture captured_adoption_run(const SimConfig& cfg, double q, std::uint64_t trial) {
  validate_config(cfg);
  const auto qi = std::find(cfg.q_values.begin(), cfg.q_values.end(), q);
  if (qi == cfg.q_values.end()) throw ConfigError("q is not on the configured grid");
  const std::uint64_t stream =
      detail::substream_seed(cfg.seed, 30 + (qi - cfg.q_values.begin()));
  auto rng = Xoshiro256ss::for_trial(stream, trial);

  RunCapture cap;
  cap.validity = detail::sim_validity();
  cap.contract = detail::adoption_contract(cfg.lambda);
  cap.agents = {"agent"};
  const Token tok = detail::supporter_token("ev", "h1", 0, cap.validity.secret_key);
  RouterConfig rc;
  rc.completeness_probability = 1.0 - q;
  Belief b({0.7, 0.3});
  cap.logs.push_back(audit_init("agent", b, 1));
  cap.events.assign(1, {});
  const std::vector<std::size_t> truth_top{1};
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    Event e;
    e.receiver = "agent";
    e.round = round;
    e.messages.push_back({"tool", {"agent"}, round, {tok}, "", std::nullopt});
    const StepOutcome step = enforced_step(cap.contract, rc, b, e, cap.validity, rng);
    append_step(cap.logs[0], round, "agent", e, cap.validity, step);
    cap.events[0].push_back(e);
    b = step.belief;
    if (argmax_set(b) == truth_top) break;
  }
  return cap;
}

// ---------------------------------------------------------------------------
// Sim V: validation cost under token flooding

namespace detail {

inline Contract relevance_contract() {
  Contract c;
  c.name = "one-relevant";
  c.hypotheses = HypothesisSpace({"h0", "h1"});
  c.clauses.push_back({k_supporters_trigger("supported_h1", "h1", 1), op_log_odds("h1", 1.0, 5.0)});
  c.fallback = op_identity();
  return c;
}

inline Event flood_event(const std::vector<Token>& order, std::int64_t round) {
  Event e;
  e.receiver = "me";
  e.round = round;
  Message msg;
  msg.sender = "crowd";
  msg.recipients = {"me"};
  msg.sent_at = round;
  msg.tokens = order;
  e.messages.push_back(std::move(msg));
  return e;
}

inline int measured_checks(const Contract& contract, const ValidityConfig& vcfg,
                           const std::vector<Token>& order, bool short_circuit,
                           Xoshiro256ss& rng) {
  RouterConfig rc;
  rc.short_circuit = short_circuit;
  const Belief b({0.6, 0.4});
  const StepOutcome out = enforced_step(contract, rc, b, flood_event(order, 0), vcfg, rng);
  return out.validations;
}

inline SimMetrics run_sim_v(const SimConfig& cfg) {
  SimMetrics m;
  m.sim_id = "V";
  const ValidityConfig vcfg = sim_validity();
  const Contract contract = relevance_contract();

  std::vector<int> grid;
  for (int k = 1; k <= 5; ++k) {
    const int nk = std::max(1, (cfg.token_count * k + 4) / 5);
    if (grid.empty() || grid.back() != nk) grid.push_back(nk);
  }
  if (grid.back() != cfg.token_count) grid.push_back(cfg.token_count);

  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const int nk = grid[gi];
    std::vector<Token> base;
    base.reserve(nk);
    for (int i = 0; i + 1 < nk; ++i) {
      base.push_back(plain_token("u" + std::to_string(i), 0, vcfg.secret_key));
    }
    const Token relevant = supporter_token("needle", "h1", 0, vcfg.secret_key);

    const std::string prefix = "V:N=" + std::to_string(nk);
    const std::uint64_t stream = substream_seed(cfg.seed, 40 + gi);

    // deterministic strategies: relevant token last in arrival order
    std::vector<Token> tail_order = base;
    tail_order.push_back(relevant);
    auto scratch = Xoshiro256ss(0);
    const int full_checks = measured_checks(contract, vcfg, tail_order, false, scratch);
    const int adv_checks = measured_checks(contract, vcfg, tail_order, true, scratch);
    const std::pair<const char*, int> strategies[] = {{"full", full_checks},
                                                      {"short-adversarial", adv_checks}};
    for (const auto& [name, checks] : strategies) {
      MetricRow row;
      row.condition = prefix + ":" + std::string(name);
      row.trials = 1;
      row.mean_cost = checks;
      row.aux = nk;
      const auto ci = wilson_ci(0, 1);
      row.ci_lo = ci.first;
      row.ci_hi = ci.second;
      m.rows.push_back(row);
      m.raw.push_back(raw_line(row.condition, 0, checks, nk, 0.0, 0.0));
    }

    const int trials = nk == cfg.token_count ? cfg.trials : std::min(cfg.trials, 2000);
    std::vector<int> checks(trials);
    for_each_trial(trials, cfg.jobs, [&](int t) {
      auto rng = Xoshiro256ss::for_trial(stream, t);
      std::vector<Token> order = base;
      order.push_back(relevant);
      rng.shuffle(order);
      checks[t] = measured_checks(contract, vcfg, order, true, rng);
    });
    MetricRow row;
    row.condition = prefix + ":short-random";
    row.trials = trials;
    double total = 0.0;
    for (int t = 0; t < trials; ++t) {
      total += checks[t];
      m.raw.push_back(raw_line(row.condition, t, checks[t], nk, 0.0, 0.0));
    }
    row.mean_cost = total / trials;
    row.aux = nk;
    const auto ci = wilson_ci(0, trials);
    row.ci_lo = ci.first;
    row.ci_hi = ci.second;
    m.rows.push_back(row);
  }
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sim VI: seeded evidence, flooding, and the k-witness contract

namespace detail {

struct SimViTrialOut {
  ArmStats none;
  ArmStats baseline;
  std::vector<ArmStats> enforced;  // one per k
};

struct SimViWorld {
  Graph g;
  std::vector<Belief> init;
  std::vector<Token> tokens;
  FloodResult flow;
};

inline const Token& token_by_id(const SimViWorld& w, const std::string& id) {
  for (const auto& t : w.tokens) {
    if (t.id == id) return t;
  }
  throw std::logic_error("flooded an id that was never seeded: " + id);
}

inline SimViWorld sim_vi_world(const SimConfig& cfg, double eps, Xoshiro256ss& rng,
                               const ValidityConfig& vcfg) {
  SimViWorld w;
  w.g = connected_erdos_renyi(cfg.n, cfg.topology_p, rng);
  w.init.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    const double p1 = rng.beta(4.0, 6.0);
    w.init.push_back(Belief({1.0 - p1, p1}));
  }
  const int n_seed = std::max(1, static_cast<int>(std::lround(cfg.rho * cfg.n)));
  std::vector<int> perm(cfg.n);
  for (int i = 0; i < cfg.n; ++i) perm[i] = i;
  rng.shuffle(perm);
  TokenPlacement placement(cfg.n);
  for (int s = 0; s < n_seed; ++s) {
    // a flipped label turns a truth-sound supporter into support for the
    // wrong hypothesis
    const std::string hyp = rng.bernoulli(eps) ? "h0" : "h1";
    w.tokens.push_back(supporter_token("ev" + std::to_string(s), hyp, 0, vcfg.secret_key));
    placement[perm[s]] = {w.tokens.back().id};
  }
  w.flow = flood(w.g, placement, cfg.T);
  return w;
}

inline int tokens_supporting(const SimViWorld& w, const std::set<std::string>& known,
                             const std::string& hyp) {
  int count = 0;
  for (const auto& id : known) {
    const Token& tok = token_by_id(w, id);
    const auto it = tok.support_labels.find(hyp);
    if (it != tok.support_labels.end() && it->second == SupportLabel::supports) ++count;
  }
  return count;
}

// Evidence becomes usable once any agent's holdings contain k same-side
// supporters; cascades observed strictly before that are social artifacts.
inline bool evidence_available(const SimViWorld& w, int t, int k) {
  for (const auto& known : w.flow.knowledge[t + 1]) {
    if (tokens_supporting(w, known, "h1") >= k) return true;
    if (tokens_supporting(w, known, "h0") >= k) return true;
  }
  return false;
}

inline ArmStats sim_vi_none_arm(const SimConfig& cfg, const SimViWorld& w,
                                const std::vector<int>& raw) {
  ArmStats a;
  for (int t = 0; t <= cfg.T; ++t) record_state(w.init, 1, a);
  finish_arm(w.init, 1, cfg.cascade_conf_threshold, raw, a);
  return a;
}

inline ArmStats sim_vi_baseline_arm(const SimConfig& cfg, const SimViWorld& w,
                                    const std::vector<int>& raw) {
  ArmStats a;
  std::vector<Belief> bs = w.init;
  record_state(bs, 1, a);
  for (int t = 0; t < cfg.T; ++t) {
    bs = social_pool_sharpen(bs, w.g, cfg.w0, cfg.ws, cfg.gamma);
    for (int i = 0; i < cfg.n; ++i) {
      // evidence enters additively after pooling, one step per newly seen token
      std::vector<std::string> fresh;
      const auto& now = w.flow.knowledge[t + 1][i];
      const auto& before = w.flow.knowledge[t][i];
      for (const auto& id : now) {
        if (t == 0 || !before.count(id)) fresh.push_back(id);
      }
      for (const auto& id : fresh) {
        const bool backs_truth = tokens_supporting(w, {id}, "h1") > 0;
        const std::size_t target = backs_truth ? 1 : 0;
        bs[i] = logodds_update(bs[i],
                               LogOddsStep(target, cfg.baseline_evidence_step, cfg.evidence_cap));
      }
    }
    record_state(bs, 1, a);
  }
  finish_arm(bs, 1, cfg.cascade_conf_threshold, raw, a);
  return a;
}

inline ArmStats sim_vi_pbrc_arm(const SimConfig& cfg, const SimViWorld& w, int k,
                                const std::vector<int>& raw, Xoshiro256ss& rng,
                                RunCapture* capture) {
  const Contract contract =
      k_witness_contract(k, cfg.lambda, cfg.evidence_step, cfg.evidence_cap);
  const ValidityConfig vcfg = sim_validity();
  const RouterConfig rc;
  const auto names = agent_names(cfg.n);
  ArmStats a;
  std::vector<Belief> bs = w.init;
  record_state(bs, 1, a);
  if (capture) {
    capture->contract = contract;
    capture->validity = vcfg;
    capture->agents = names;
    capture->logs.clear();
    capture->events.assign(cfg.n, {});
    for (int i = 0; i < cfg.n; ++i) capture->logs.push_back(audit_init(names[i], bs[i], 0));
  }
  for (int t = 0; t < cfg.T; ++t) {
    std::vector<Belief> next;
    next.reserve(bs.size());
    for (int i = 0; i < cfg.n; ++i) {
      Event e;
      e.receiver = names[i];
      e.round = t;
      Message msg;
      msg.sender = "net";
      msg.recipients = {names[i]};
      msg.sent_at = t;
      for (const auto& id : w.flow.knowledge[t + 1][i]) msg.tokens.push_back(token_by_id(w, id));
      e.messages.push_back(std::move(msg));
      const StepOutcome out = enforced_step(contract, rc, bs[i], e, vcfg, rng);
      a.cost += out.validations;
      if (capture) {
        append_step(capture->logs[i], t, names[i], e, vcfg, out);
        capture->events[i].push_back(e);
      }
      next.push_back(out.belief);
    }
    bs = std::move(next);
    record_state(bs, 1, a);
    if (!evidence_available(w, t, k) &&
        all_wrong_and_sure(bs, 1, cfg.cascade_conf_threshold)) {
      a.pre_evidence_cascade = true;
    }
  }
  finish_arm(bs, 1, cfg.cascade_conf_threshold, raw, a);
  return a;
}

inline SimViTrialOut sim_vi_trial(const SimConfig& cfg, double eps, std::uint64_t stream,
                                  std::uint64_t trial, int capture_k, RunCapture* capture) {
  auto rng = Xoshiro256ss::for_trial(stream, trial);
  const ValidityConfig vcfg = sim_validity();
  const SimViWorld w = sim_vi_world(cfg, eps, rng, vcfg);
  const std::vector<int> raw = answers_of(w.init);
  SimViTrialOut out;
  out.none = sim_vi_none_arm(cfg, w, raw);
  out.baseline = sim_vi_baseline_arm(cfg, w, raw);
  for (int k : cfg.k_values) {
    RunCapture* cap = capture && k == capture_k ? capture : nullptr;
    out.enforced.push_back(sim_vi_pbrc_arm(cfg, w, k, raw, rng, cap));
  }
  return out;
}

inline SimMetrics run_sim_vi(const SimConfig& cfg) {
  SimMetrics m;
  m.sim_id = "VI";
  for (std::size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
    const double eps = cfg.epsilons[ei];
    const std::uint64_t stream = substream_seed(cfg.seed, 50 + ei);
    std::vector<SimViTrialOut> results(cfg.trials);
    for_each_trial(cfg.trials, cfg.jobs, [&](int t) {
      results[t] = sim_vi_trial(cfg, eps, stream, t, -1, nullptr);
    });
    std::ostringstream head;
    head << "VI:eps=" << eps;
    std::vector<ArmStats> none, base;
    none.reserve(results.size());
    base.reserve(results.size());
    for (auto& r : results) {
      none.push_back(std::move(r.none));
      base.push_back(std::move(r.baseline));
    }
    fold_arm(head.str() + ":none", none, cfg.n, cfg.T, m);
    fold_arm(head.str() + ":baseline", base, cfg.n, cfg.T, m);
    for (std::size_t ki = 0; ki < cfg.k_values.size(); ++ki) {
      std::vector<ArmStats> arm;
      arm.reserve(results.size());
      for (auto& r : results) arm.push_back(std::move(r.enforced[ki]));
      fold_arm(head.str() + ":pbrc-k" + std::to_string(cfg.k_values[ki]), arm, cfg.n, cfg.T, m);
    }
  }
  return m;
}

}  // namespace detail

// One evidence-enabled enforced run with its audit trail, from the condition
// stream run_sim uses for this epsilon.
inline RunCapture captured_evidence_run(const SimConfig& cfg, double epsilon, int k,
                                        std::uint64_t trial) {
  validate_config(cfg);
  const auto ei = std::find(cfg.epsilons.begin(), cfg.epsilons.end(), epsilon);
  if (ei == cfg.epsilons.end()) throw ConfigError("epsilon is not on the configured grid");
  if (std::find(cfg.k_values.begin(), cfg.k_values.end(), k) == cfg.k_values.end()) {
    throw ConfigError("witness count is not on the configured grid");
  }
  const std::uint64_t stream =
      detail::substream_seed(cfg.seed, 50 + (ei - cfg.epsilons.begin()));
  RunCapture cap;
  detail::sim_vi_trial(cfg, epsilon, stream, trial, k, &cap);
  return cap;
}

// ---------------------------------------------------------------------------

inline SimMetrics run_sim(const SimConfig& cfg) {
  validate_config(cfg);
  if (cfg.sim_id == "I") return detail::run_sim_i(cfg);
  if (cfg.sim_id == "Ib") return detail::run_sim_ib(cfg);
  if (cfg.sim_id == "II") return detail::run_sim_ii(cfg);
  if (cfg.sim_id == "III") return detail::run_sim_iii(cfg);
  if (cfg.sim_id == "IV") return detail::run_sim_iv(cfg);
  if (cfg.sim_id == "V") return detail::run_sim_v(cfg);
  if (cfg.sim_id == "VI") return detail::run_sim_vi(cfg);
  throw ConfigError("unknown simulation id: " + cfg.sim_id);
}

}  // namespace pbrc
