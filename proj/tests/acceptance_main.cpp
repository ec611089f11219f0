// End-to-end acceptance checks. Each criterion prints exactly one PASS/FAIL
// line with its measured numbers; the process exits nonzero if any fail.

#include <pbrc/adversary.hpp>
#include <pbrc/cddl.hpp>
#include <pbrc/sim.hpp>

#include "testutil.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <queue>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace pbrc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

Certificate collapse(const Certificate& c) {
  return c.witness.empty() ? fallback_certificate() : c;
}

// ---------------------------------------------------------------------------
// 1. cascade statistics at the published operating point

Outcome cascade_statistics() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Want {
    const char* topo;
    double rate;
  };
  const Want wants[] = {{"ring", 0.002}, {"er", 0.256}, {"complete", 0.488}};
  std::ostringstream d;
  bool ok = true;
  for (const auto& w : wants) {
    SimConfig cfg = default_config("I");
    cfg.topology = w.topo;
    const SimMetrics m = run_sim(cfg);
    const MetricRow* base = nullptr;
    const MetricRow* gated = nullptr;
    for (const auto& r : m.rows) {
      if (r.condition == std::string("I:") + w.topo + ":baseline") base = &r;
      if (r.condition == std::string("I:") + w.topo + ":pbrc") gated = &r;
    }
    if (!base || !gated) return {false, "missing metric rows for " + std::string(w.topo)};
    ok = ok && std::abs(base->cascade_rate - w.rate) <= 0.05;
    ok = ok && gated->cascade_rate == 0.0;
    ok = ok && std::abs(gated->mean_conf_T - 0.543) <= 0.01;
    ok = ok && base->mean_conf_T >= 0.98;
    d << w.topo << " " << num(base->cascade_rate) << "/" << num(gated->cascade_rate) << " conf "
      << num(base->mean_conf_T) << "/" << num(gated->mean_conf_T) << "  ";
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ok = ok && secs < 60.0;
  d << num(secs) << " s";
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 2. dilution closed form vs iteration

Outcome dilution_closed_form_check() {
  auto rng = Xoshiro256ss(9002);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t m = 2 + rng.uniform_int(4);
    std::vector<double> w(m);
    for (auto& x : w) x = 0.05 + rng.uniform01();
    const Belief b0(w);
    const DilutionParams p(0.001 + 0.997 * rng.uniform01());
    const std::uint64_t t = rng.uniform_int(51);
    Belief it = b0;
    for (std::uint64_t s = 0; s < t; ++s) it = dilute(it, p);
    const Belief cf = dilute_closed_form(b0, p, t);
    for (std::size_t h = 0; h < m; ++h) worst = std::max(worst, std::abs(it[h] - cf[h]));
  }
  return {worst <= 1e-9, "10000 draws, max coordinate gap " + num(worst)};
}

// ---------------------------------------------------------------------------
// 3. social-only streams never gain confidence or move the verdict

Outcome social_only_monotonicity() {
  auto rng = Xoshiro256ss(9003);
  const ValidityConfig cfg = testutil::basic_config();
  const std::vector<std::string> hyps{"True", "False"};
  long conf_violations = 0, top_violations = 0, steps = 0;
  for (int i = 0; i < 10000; ++i) {
    const Contract c = testutil::random_evidential_contract(rng, hyps);
    Belief b({0.2 + 0.6 * rng.uniform01(), 0.2 + 0.6 * rng.uniform01()});
    const auto top0 = argmax_set(b);
    double prev = conf(b);
    RouterConfig rc;
    const int rounds = 1 + static_cast<int>(rng.uniform_int(10));
    for (int r = 0; r < rounds; ++r) {
      Event e = testutil::one_message_event({}, r, "peer", "the consensus is overwhelming");
      e.messages[0].confidence_claim = 0.99;
      if (rng.bernoulli(0.5)) {
        // junk with a bad tag stays outside the validated set
        testutil::TokenOpts opts;
        opts.valid = false;
        opts.labels = {{"True", SupportLabel::supports}};
        e.messages[0].tokens.push_back(
            testutil::make_token("junk" + std::to_string(i) + "_" + std::to_string(r), cfg, opts));
      }
      const StepOutcome out = enforced_step(c, rc, b, e, cfg, rng);
      ++steps;
      if (conf(out.belief) > prev + 1e-12) ++conf_violations;
      if (argmax_set(out.belief) != top0) ++top_violations;
      prev = conf(out.belief);
      b = out.belief;
    }
  }
  return {conf_violations == 0 && top_violations == 0,
          num(steps) + " steps, " + num(conf_violations) + " confidence gains, " +
              num(top_violations) + " verdict moves"};
}

// ---------------------------------------------------------------------------
// 4. compilation and gate equivalences

Outcome compilation_equivalences() {
  auto rng = Xoshiro256ss(9004);
  const ValidityConfig cfg = testutil::basic_config();
  const std::vector<std::string> hyps{"True", "False"};
  long nf_bad = 0, gate_bad = 0, router_bad = 0, transp_bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const Contract c = testutil::random_evidential_contract(rng, hyps);
    Event e;
    const double pick = rng.uniform01();
    if (pick < 0.25) {
      e = testutil::one_message_event({}, 1, "peer", "pressure");
    } else if (pick < 0.55) {
      e = testutil::random_event(rng, cfg, hyps, 2, 1);
    } else {
      e = testutil::random_event(rng, cfg, hyps, 2, 5);
    }
    const Belief b({0.2 + 0.6 * rng.uniform01(), 0.2 + 0.6 * rng.uniform01()});

    const UpdateResult orig = raw_update(c, b, e, cfg);

    // normalization keeps the belief path and the canonical audit view
    Contract spliced = c;
    if (rng.bernoulli(0.4)) {
      Trigger free;
      free.name = "free";
      spliced.clauses.insert(spliced.clauses.begin() + rng.uniform_int(spliced.clauses.size() + 1),
                             {free, testutil::random_op(rng, hyps)});
    }
    const UpdateResult raw_s = raw_update(spliced, b, e, cfg);
    const UpdateResult norm = raw_update(compile_nf(spliced), b, e, cfg);
    bool nf_ok = raw_s.belief.size() == norm.belief.size();
    for (std::size_t h = 0; nf_ok && h < raw_s.belief.size(); ++h) {
      nf_ok = std::abs(raw_s.belief[h] - norm.belief[h]) <= 1e-12;
    }
    nf_ok = nf_ok && collapse(raw_s.certificate) == collapse(norm.certificate);
    if (!nf_ok) ++nf_bad;

    // the output gate projects onto the guard-compiled contract
    const UpdateResult eg = raw_update(compile_eg(c), b, e, cfg);
    RouterConfig gate;
    gate.mode = RouterMode::GateOnly;
    const StepOutcome gated = enforced_gate(c, gate, b, e, cfg, orig.belief, orig.certificate);
    if (!(gated.belief == eg.belief &&
          canonicalize(gated.certificate) == canonicalize(eg.certificate))) {
      ++gate_bad;
    }

    // a sound and complete state-holding router lands on the same projection
    RouterConfig hold;
    const StepOutcome held = enforced_step(c, hold, b, e, cfg, rng);
    if (!(held.belief == eg.belief &&
          canonicalize(held.certificate) == canonicalize(eg.certificate))) {
      ++router_bad;
    }

    // on contracts whose triggers all demand valid tokens the gate is inert
    if (!(gated.belief == orig.belief &&
          canonicalize(gated.certificate) == canonicalize(orig.certificate))) {
      ++transp_bad;
    }
  }
  const bool ok = nf_bad == 0 && gate_bad == 0 && router_bad == 0 && transp_bad == 0;
  return {ok, "10000 pairs, mismatches nf " + num(nf_bad) + " gate " + num(gate_bad) +
                  " router " + num(router_bad) + " transparency " + num(transp_bad)};
}

// ---------------------------------------------------------------------------
// 5. token-equivalent events with varied rhetoric

Outcome token_sufficiency() {
  const SimConfig cfg = default_config("II");
  const SimMetrics m = run_sim(cfg);
  if (m.rows.size() != 1 || m.rows[0].condition != "II:invariant") {
    return {false, "unexpected metric rows"};
  }
  const MetricRow& row = m.rows[0];
  const bool counter = sender_sensitivity_mismatch(cfg.seed);
  const bool ok = row.trials == 2000 && row.aux == 0.0 && row.cascade_rate == 0.0 && counter;
  return {ok, num(row.trials) + " pairs, " + num(row.aux) +
                  " mismatches; sender-gated contract mismatch: " + (counter ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 6. flooding: closed form, closure vs diameter, equivalence, dominance

void bfs_from(const Graph& g, int src, std::vector<int>& dist) {
  dist.assign(g.n, -1);
  std::queue<int> q;
  dist[src] = 0;
  q.push(src);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : g.out[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
    }
  }
}

Graph random_digraph(Xoshiro256ss& rng, int n, double p) {
  Graph g(n);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u != v && rng.bernoulli(p)) g.add_edge(u, v);
    }
  }
  return g;
}

Outcome flooding_guarantees() {
  auto rng = Xoshiro256ss(9006);
  std::ostringstream d;

  // distance-truncated union formula, re-derived with a plain BFS
  long cells = 0, cell_bad = 0;
  for (int gi = 0; gi < 100; ++gi) {
    const int n = 2 + static_cast<int>(rng.uniform_int(11));
    const Graph g = random_digraph(rng, n, 0.1 + 0.4 * rng.uniform01());
    const FloodResult fr = flood(g, unique_placement(g), 10);
    std::vector<std::vector<int>> dist(n);
    for (int j = 0; j < n; ++j) bfs_from(g, j, dist[j]);
    for (int t = 0; t <= 10; ++t) {
      for (int i = 0; i < n; ++i) {
        std::set<std::string> want;
        for (int j = 0; j < n; ++j) {
          if (dist[j][i] >= 0 && dist[j][i] <= t) want.insert("tok" + std::to_string(j));
        }
        ++cells;
        if (fr.knowledge[t][i] != want) ++cell_bad;
      }
    }
  }
  d << cells << " knowledge cells, " << cell_bad << " off";

  // closure time equals diameter family by family
  const SimMetrics m3 = run_sim(default_config("III"));
  long fam_bad = 0;
  for (const auto& r : m3.rows) {
    if (r.cascade_rate != 1.0) ++fam_bad;
  }
  d << "; " << m3.rows.size() << " families, " << fam_bad << " closure/diameter misses";

  // trace equivalence is reach equivalence, both directions
  long pair_bad = 0;
  for (int i = 0; i < 200; ++i) {
    const int n = 2 + static_cast<int>(rng.uniform_int(8));
    const Graph a = random_digraph(rng, n, 0.1 + 0.4 * rng.uniform01());
    Graph b;
    int horizon = 1 + static_cast<int>(rng.uniform_int(6));
    if (i % 4 == 0) {
      b = a;  // identical: both sides must say yes
    } else if (i % 4 == 1) {
      b = random_digraph(rng, n, 0.1 + 0.4 * rng.uniform01());
      horizon = 0;  // at horizon zero every same-size pair is equivalent
    } else {
      b = random_digraph(rng, n, 0.1 + 0.4 * rng.uniform01());
    }
    const bool reach = reach_equiv(a, b, horizon);
    const FloodResult fa = flood(a, unique_placement(a), horizon);
    const FloodResult fb = flood(b, unique_placement(b), horizon);
    const bool trace = fa.knowledge == fb.knowledge;
    if (reach != trace) ++pair_bad;
  }
  d << "; 200 pairs, " << pair_bad << " equivalence splits";

  // flooding dominates any edge-respecting dissemination pointwise
  long dom_bad = 0;
  for (int i = 0; i < 50; ++i) {
    const int n = 3 + static_cast<int>(rng.uniform_int(8));
    const Graph g = random_digraph(rng, n, 0.2 + 0.4 * rng.uniform01());
    const int horizon = 1 + static_cast<int>(rng.uniform_int(8));
    const FloodResult fr = flood(g, unique_placement(g), horizon);
    std::vector<std::set<std::string>> have(n);
    for (int v = 0; v < n; ++v) have[v] = {"tok" + std::to_string(v)};
    for (int t = 0; t < horizon; ++t) {
      std::vector<std::set<std::string>> next = have;
      for (int v = 0; v < n; ++v) {
        for (int u : g.in[v]) {
          if (rng.bernoulli(0.3)) continue;  // lazy link this round
          for (const auto& tok : have[u]) {
            if (rng.bernoulli(0.5)) next[v].insert(tok);
          }
        }
      }
      have = std::move(next);
      for (int v = 0; v < n; ++v) {
        for (const auto& tok : have[v]) {
          if (!fr.knowledge[t + 1][v].count(tok)) ++dom_bad;
        }
      }
    }
  }
  d << "; 50 disseminations, " << dom_bad << " dominance breaks";

  const bool ok = cell_bad == 0 && fam_bad == 0 && pair_bad == 0 && dom_bad == 0;
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 7. adversary bounds and failure localization

Contract h1_supporter_contract(bool fresh_atom, std::int64_t window) {
  Trigger t;
  t.name = "supported";
  t.vars = {"x"};
  t.atoms = {atom_valid("x"), atom_supports("x", "h1")};
  if (fresh_atom) t.atoms.push_back(atom_fresh("x", window));
  Contract c;
  c.name = "one-supporter";
  c.hypotheses = HypothesisSpace({"h0", "h1"});
  c.clauses = {{t, op_log_odds("h1", 2.0, 5.0)}};
  c.fallback = op_dilute(0.1);
  return c;
}

Outcome adversary_bounds() {
  auto rng = Xoshiro256ss(9007);
  std::ostringstream d;

  // binomial bound vs exhaustive enumeration
  const double got = forgery_prob(5, 3, 0.1);
  double enumerated = 0.0;
  for (unsigned mask = 0; mask < 32u; ++mask) {
    const int hits = std::popcount(mask);
    if (hits >= 3) enumerated += std::pow(0.1, hits) * std::pow(0.9, 5 - hits);
  }
  const bool prob_ok = std::abs(got - 0.00856) <= 1e-5 && std::abs(got - enumerated) <= 1e-12;
  d << "forgery prob " << num(got) << " (enum " << num(enumerated) << ")";

  // a replayed token older than the declared window only ever dilutes
  long replay_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t window = 1 + static_cast<std::int64_t>(rng.uniform_int(10));
    const std::int64_t age = window + 1 + static_cast<std::int64_t>(rng.uniform_int(20));
    const std::int64_t now = age + static_cast<std::int64_t>(rng.uniform_int(5));
    ValidityConfig vcfg = testutil::basic_config();
    Contract c;
    if (i % 2 == 0) {
      c = h1_supporter_contract(true, window);
    } else {
      c = h1_supporter_contract(false, 0);
      vcfg.freshness_window = window;
    }
    testutil::TokenOpts opts;
    opts.labels = {{"h1", SupportLabel::supports}};
    opts.issued_at = now - age;
    const Token stale = testutil::make_token("replayed" + std::to_string(i), vcfg, opts);
    const Belief b({0.3 + 0.4 * rng.uniform01(), 0.3});
    RouterConfig rc;
    const StepOutcome out =
        enforced_step(c, rc, b, testutil::one_message_event({stale}, now), vcfg, rng);
    if (out.certificate.label != kFallbackLabel) ++replay_bad;
  }
  d << "; " << replay_bad << "/1000 stale replays got through";

  // a keyless adversary never moves any honest verdict
  long forged_moves = 0;
  for (int run = 0; run < 100; ++run) {
    const Contract c = h1_supporter_contract(false, 0);
    const ValidityConfig vcfg = testutil::basic_config();
    AdversaryModel adv;
    adv.kind = AdversaryKind::Unforgeable;
    adv.shape.labels = {{"h1", SupportLabel::supports}};
    std::vector<Event> base;
    for (int r = 0; r < 10; ++r) {
      base.push_back(testutil::one_message_event({}, r, "peer", "surely h1"));
    }
    Belief b({0.3 + 0.4 * rng.uniform01(), 0.3});
    const auto top0 = argmax_set(b);
    RouterConfig rc;
    for (const auto& e : apply_adversary(adv, base)) {
      const StepOutcome out = enforced_step(c, rc, b, e, vcfg, rng);
      if (argmax_set(out.belief) != top0 || out.certificate.label != kFallbackLabel) {
        ++forged_moves;
      }
      b = out.belief;
    }
  }
  d << "; " << forged_moves << "/1000 forged steps moved a verdict";

  // the localizer names the injected failure mode every time
  long recovered = 0;
  for (int i = 0; i < 500; ++i) {
    const ValidityConfig vcfg = testutil::basic_config();
    const std::int64_t window = 5 + static_cast<std::int64_t>(rng.uniform_int(10));
    const double p0 = 0.55 + 0.3 * rng.uniform01();
    const Belief b0({p0, 1.0 - p0});
    const int mode = i % 4;
    AuditLog log;
    std::vector<Event> events;
    FaultMode want = FaultMode::RouterUnsound;

    if (mode == 0) {
      // router unsoundness: a logged certificate the event cannot re-verify
      want = FaultMode::RouterUnsound;
      const Contract c = h1_supporter_contract(false, 0);
      testutil::TokenOpts neutral;
      const Token tok = testutil::make_token("n" + std::to_string(i), vcfg, neutral);
      const Event e = testutil::one_message_event({tok}, 0);
      log = audit_init("agent", b0, 0);
      const StepOutcome forged{Belief({0.2, 0.8}), Certificate{"supported", {tok.id}},
                               true, 0, std::nullopt, 0};
      append_step(log, 0, "agent", e, vcfg, forged);
      events = {e};
      const auto v = localize_failure(log, events, c, GroundTruth{"h0", window}, vcfg);
      if (v && v->modes == std::vector<FaultMode>{want}) ++recovered;
      continue;
    }

    Contract c = h1_supporter_contract(false, 0);
    testutil::TokenOpts opts;
    std::int64_t round = 0;
    if (mode == 1) {
      // contextual validity: an old token replayed into an unguarded clause
      want = FaultMode::ContextualValidity;
      round = window + 1 + static_cast<std::int64_t>(rng.uniform_int(10));
      opts.labels = {{"h1", SupportLabel::supports}};
      opts.issued_at = 0;
    } else if (mode == 2) {
      // evidence integrity: fresh, validly signed, and wrong
      want = FaultMode::EvidenceIntegrity;
      round = static_cast<std::int64_t>(rng.uniform_int(5));
      opts.labels = {{"h1", SupportLabel::supports}};
      opts.issued_at = round;
    } else {
      // contract misspecification: sound evidence driving an inverted clause
      want = FaultMode::ContractMisspec;
      Trigger t;
      t.name = "sup0";
      t.vars = {"x"};
      t.atoms = {atom_valid("x"), atom_fresh("x", window), atom_supports("x", "h0")};
      c.clauses = {{t, op_log_odds("h1", 1.8 + 1.2 * rng.uniform01(), 5.0)}};
      round = static_cast<std::int64_t>(rng.uniform_int(5));
      opts.labels = {{"h0", SupportLabel::supports}};
      opts.issued_at = round;
    }
    const Token tok = testutil::make_token("w" + std::to_string(i), vcfg, opts);
    events.clear();
    const int quiet = static_cast<int>(rng.uniform_int(3));
    for (int r = 0; r < quiet; ++r) {
      events.push_back(testutil::one_message_event({}, round - quiet + r, "peer", "quiet"));
    }
    events.push_back(testutil::one_message_event({tok}, round));

    log = audit_init("agent", b0, events.front().round);
    Belief b = b0;
    RouterConfig rc;
    for (const auto& e : events) {
      const StepOutcome out = enforced_step(c, rc, b, e, vcfg, rng);
      append_step(log, e.round, "agent", e, vcfg, out);
      b = out.belief;
    }
    const auto v = localize_failure(log, events, c, GroundTruth{"h0", window}, vcfg);
    if (v && v->modes == std::vector<FaultMode>{want}) ++recovered;
  }
  d << "; localizer " << recovered << "/500";

  const bool ok = prob_ok && replay_bad == 0 && forged_moves == 0 && recovered == 500;
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 8. every verdict flip carries a witness; ungated runs refuse attribution

struct Corpus {
  std::vector<RunCapture> runs;
  std::string label;
};

std::vector<RunCapture> enforced_corpus() {
  std::vector<RunCapture> caps;
  const SimConfig cfg1 = default_config("I");
  for (const char* topo : {"ring", "er", "complete"}) {
    for (std::uint64_t t = 0; t < 2; ++t) {
      caps.push_back(captured_token_empty_run(cfg1, topo, t));
    }
  }
  const SimConfig cfg4 = default_config("IV");
  for (std::uint64_t t = 0; t < 3; ++t) caps.push_back(captured_adoption_run(cfg4, 0.3, t));
  caps.push_back(captured_adoption_run(cfg4, 0.0, 0));
  caps.push_back(captured_adoption_run(cfg4, 0.7, 0));
  SimConfig cfg6 = default_config("VI");
  cfg6.T = 13;  // evidence keeps flowing past the last flip
  caps.push_back(captured_evidence_run(cfg6, 0.1, 3, 0));
  caps.push_back(captured_evidence_run(cfg6, 0.1, 3, 1));
  caps.push_back(captured_evidence_run(cfg6, 0.0, 5, 0));
  caps.push_back(captured_evidence_run(cfg6, 0.2, 1, 0));
  return caps;
}

long argmax_changes(const AuditLog& log) {
  long changes = 0;
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    if (argmax_set(Belief(log.records[i - 1].belief_after)) !=
        argmax_set(Belief(log.records[i].belief_after))) {
      ++changes;
    }
  }
  return changes;
}

Outcome flip_accountability(const std::vector<RunCapture>& caps) {
  long logs = 0, flips_seen = 0, bad = 0;
  for (const auto& cap : caps) {
    for (const auto& log : cap.logs) {
      ++logs;
      try {
        const auto flips = attribute_flip(log);
        if (static_cast<long>(flips.size()) != argmax_changes(log)) ++bad;
        for (const auto& f : flips) {
          ++flips_seen;
          if (f.certificate.witness.empty() || f.certificate.label == kFallbackLabel ||
              f.certificate.label == kInitLabel) {
            ++bad;
          }
        }
      } catch (const AttributionViolation&) {
        ++bad;
      }
    }
  }

  // ad-hoc enforced runs over random contracts widen the net
  auto rng = Xoshiro256ss(9008);
  const ValidityConfig vcfg = testutil::basic_config();
  const std::vector<std::string> hyps{"h0", "h1"};
  for (int run = 0; run < 300; ++run) {
    const Contract c = testutil::random_evidential_contract(rng, hyps);
    Belief b({0.2 + 0.6 * rng.uniform01(), 0.2 + 0.6 * rng.uniform01()});
    AuditLog log = audit_init("agent", b, 0);
    RouterConfig rc;
    const int rounds = 2 + static_cast<int>(rng.uniform_int(6));
    for (int r = 0; r < rounds; ++r) {
      const Event e = rng.bernoulli(0.3)
                          ? testutil::one_message_event({}, r, "peer", "pressure")
                          : testutil::random_event(rng, vcfg, hyps, r);
      const StepOutcome out = enforced_step(c, rc, b, e, vcfg, rng);
      append_step(log, r, "agent", e, vcfg, out);
      b = out.belief;
    }
    ++logs;
    try {
      const auto flips = attribute_flip(log);
      if (static_cast<long>(flips.size()) != argmax_changes(log)) ++bad;
      for (const auto& f : flips) {
        ++flips_seen;
        if (f.certificate.witness.empty()) ++bad;
      }
    } catch (const AttributionViolation&) {
      ++bad;
    }
  }

  // the ungated pooling baseline must refuse attribution on a flip
  bool refused = false;
  const SimConfig cfg1 = default_config("I");
  for (std::uint64_t t = 0; t < 10 && !refused; ++t) {
    const RunCapture base = captured_baseline_run(cfg1, "complete", t);
    for (const auto& log : base.logs) {
      if (argmax_changes(log) == 0) continue;
      try {
        attribute_flip(log);
      } catch (const AttributionViolation&) {
        refused = true;
        break;
      }
    }
  }

  const bool ok = bad == 0 && refused;
  return {ok, num(logs) + " enforced logs, " + num(flips_seen) + " flips all witnessed, " +
                  num(bad) + " bad; ungated refusal: " + (refused ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 9. logic invariants on abstracted runs plus randomized axiom validity

FormulaPtr rand_formula(Xoshiro256ss& rng, int depth);

ProgramPtr rand_program(Xoshiro256ss& rng, int depth) {
  const std::size_t pick = depth <= 0 ? rng.uniform_int(2) : rng.uniform_int(6);
  switch (pick) {
    case 0: return p_act("a");
    case 1: return p_act("b");
    case 2: return p_seq(rand_program(rng, depth - 1), rand_program(rng, depth - 1));
    case 3: return p_choice(rand_program(rng, depth - 1), rand_program(rng, depth - 1));
    case 4: return p_test(rand_formula(rng, depth - 1));
    default: return p_star(rand_program(rng, depth - 1));
  }
}

FormulaPtr rand_formula(Xoshiro256ss& rng, int depth) {
  const std::size_t pick = depth <= 0 ? rng.uniform_int(2) : rng.uniform_int(6);
  switch (pick) {
    case 0: return f_atom("p");
    case 1: return f_atom("q");
    case 2: return f_not(rand_formula(rng, depth - 1));
    case 3: return f_and({rand_formula(rng, depth - 1), rand_formula(rng, depth - 1)});
    case 4: return f_box(rand_program(rng, depth - 1), rand_formula(rng, depth - 1));
    default: return f_believes("i", rand_formula(rng, depth - 1));
  }
}

FormulaPtr iff(FormulaPtr a, FormulaPtr b) {
  return f_and({f_implies(a, b), f_implies(b, a)});
}

KripkeModel rand_model(Xoshiro256ss& rng, int n) {
  KripkeModel m(n);
  for (const char* name : {"p", "q"}) {
    std::vector<bool> v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.bernoulli(0.5);
    m.set_atom(name, std::move(v));
  }
  for (const char* name : {"a", "b"}) {
    Relation r(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) r[i][j] = rng.bernoulli(0.35);
    }
    m.set_action(name, r);
  }
  std::vector<bool> cluster(n, false);
  cluster[rng.uniform_int(n)] = true;
  for (int i = 0; i < n; ++i) {
    if (rng.bernoulli(0.3)) cluster[i] = true;
  }
  Relation belief(n, std::vector<bool>(n, false));
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) belief[s][t] = cluster[t];
  }
  m.set_belief("i", belief);
  return m;
}

Outcome logic_invariants(const std::vector<RunCapture>& caps) {
  std::ostringstream d;

  // both trace invariants hold on enforced runs whose evidence persists past
  // the final flip (a flip into the last recorded state has no successor for
  // the flip-needs-a-trigger template to inspect, so the corpus avoids that)
  long checked = 0, stab_bad = 0, acct_bad = 0;
  for (const auto& cap : caps) {
    const bool token_empty = cap.contract.name == "token-empty-guard";
    const bool evidence = cap.contract.name.rfind("k-witness", 0) == 0;
    if (!token_empty && !evidence) continue;
    for (std::size_t i = 0; i < cap.logs.size(); ++i) {
      const KripkeModel m =
          abstract_run(cap.logs[i], cap.events[i], cap.contract, cap.agents[i], cap.validity);
      ++checked;
      if (find_counterexample(m, social_stability_formula(cap.contract, cap.agents[i]))) {
        ++stab_bad;
      }
      if (find_counterexample(m, accountability_formula(cap.contract, cap.agents[i]))) {
        ++acct_bad;
      }
    }
  }
  d << checked << " enforced abstractions, " << stab_bad << "/" << acct_bad << " violations";

  // the ungated pooling shape produces a stability counterexample
  long baseline_cx = 0, baseline_with_flip = 0;
  const SimConfig cfg1 = default_config("I");
  for (const char* topo : {"ring", "er", "complete"}) {
    for (std::uint64_t t = 0; t < 10; ++t) {
      const RunCapture base = captured_baseline_run(cfg1, topo, t);
      bool found = false;
      for (std::size_t i = 0; i < base.logs.size(); ++i) {
        if (argmax_changes(base.logs[i]) == 0) continue;
        ++baseline_with_flip;
        if (find_counterexample(abstract_run(base.logs[i], base.events[i], base.contract,
                                             base.agents[i], base.validity),
                                social_stability_formula(base.contract, base.agents[i]))) {
          ++baseline_cx;
        }
        found = true;
        break;
      }
      if (found) break;
    }
  }
  d << "; ungated counterexamples " << baseline_cx << "/" << baseline_with_flip;

  // program axioms and belief axioms on random models
  auto rng = Xoshiro256ss(9009);
  long axiom_bad = 0, kd_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_int(5));
    const KripkeModel m = rand_model(rng, n);
    const FormulaPtr phi = rand_formula(rng, 2);
    const FormulaPtr psi = rand_formula(rng, 2);
    const ProgramPtr alpha = rand_program(rng, 2);
    const ProgramPtr beta = rand_program(rng, 2);
    if (!valid_in(m, iff(f_box(p_seq(alpha, beta), phi), f_box(alpha, f_box(beta, phi))))) {
      ++axiom_bad;
    }
    if (!valid_in(m, iff(f_box(p_choice(alpha, beta), phi),
                         f_and({f_box(alpha, phi), f_box(beta, phi)})))) {
      ++axiom_bad;
    }
    if (!valid_in(m, iff(f_box(p_test(psi), phi), f_implies(psi, phi)))) ++axiom_bad;
    if (!valid_in(m, iff(f_box(p_star(alpha), phi),
                         f_and({phi, f_box(alpha, f_box(p_star(alpha), phi))})))) {
      ++axiom_bad;
    }
    if (!valid_in(m, f_implies(f_and({phi, f_box(p_star(alpha),
                                                 f_implies(phi, f_box(alpha, phi)))}),
                               f_box(p_star(alpha), phi)))) {
      ++axiom_bad;
    }
    const auto bel = [&](FormulaPtr x) { return f_believes("i", std::move(x)); };
    if (!valid_in(m, f_implies(bel(phi), f_not(bel(f_not(phi)))))) ++kd_bad;
    if (!valid_in(m, f_implies(bel(phi), bel(bel(phi))))) ++kd_bad;
    if (!valid_in(m, f_implies(f_not(bel(phi)), bel(f_not(bel(phi)))))) ++kd_bad;
  }
  d << "; 1000 models, axiom misses " << axiom_bad << " belief misses " << kd_bad;

  // induction: one-step preservation lifts to the closure
  long exercised = 0, ind_bad = 0;
  for (int i = 0; i < 20000 && exercised < 100; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_int(5));
    const KripkeModel m = rand_model(rng, n);
    const FormulaPtr phi = rand_formula(rng, 2);
    if (!valid_in(m, f_implies(phi, f_box(p_act("a"), phi)))) continue;
    ++exercised;
    if (!valid_in(m, f_implies(phi, f_box(p_star(p_act("a")), phi)))) ++ind_bad;
  }
  d << "; induction " << (exercised - ind_bad) << "/" << exercised;

  const bool ok = checked > 0 && stab_bad == 0 && acct_bad == 0 && baseline_cx >= 1 &&
                  axiom_bad == 0 && kd_bad == 0 && exercised == 100 && ind_bad == 0;
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 10. validation cost accounting

Outcome validation_cost() {
  const SimConfig cfg = default_config("V");
  const SimMetrics m = run_sim(cfg);
  const MetricRow* full = nullptr;
  const MetricRow* adv = nullptr;
  const MetricRow* rnd = nullptr;
  for (const auto& r : m.rows) {
    if (r.condition == "V:N=99:full") full = &r;
    if (r.condition == "V:N=99:short-adversarial") adv = &r;
    if (r.condition == "V:N=99:short-random") rnd = &r;
  }
  if (!full || !adv || !rnd) return {false, "missing cost rows"};
  const bool ok = full->mean_cost == 99.0 && adv->mean_cost == 99.0 && rnd->trials == 10000 &&
                  std::abs(rnd->mean_cost - 50.0) <= 2.0;
  return {ok, "full " + num(full->mean_cost) + ", adversarial " + num(adv->mean_cost) +
                  ", random mean " + num(rnd->mean_cost) + " over " + num(rnd->trials)};
}

// ---------------------------------------------------------------------------
// 11. byte-level determinism of the command line tool

int run_cmd(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "pbrc_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = PBRC_CLI_PATH;
  bool ok = true;
  std::ostringstream d;

  const fs::path a = root / "a";
  const fs::path b = root / "b";
  ok = ok && run_cmd(cli + " simulate --sim III --seed 7 --out " + a.string()) == 0;
  ok = ok && run_cmd(cli + " simulate --sim III --seed 7 --out " + b.string()) == 0;
  int same = 0;
  for (const char* name : {"metrics.csv", "trajectories.csv", "raw.csv", "manifest.json"}) {
    if (read_text_file((a / name).string()) == read_text_file((b / name).string())) ++same;
  }
  ok = ok && same == 4;
  d << "simulation bundle " << same << "/4 files identical";

  write_text_file((root / "ring.txt").string(), "0 1\n1 2\n2 3\n3 4\n4 0\n");
  const std::string fl =
      cli + " flood --graph " + (root / "ring.txt").string() + " --horizon 4 > ";
  ok = ok && run_cmd(fl + (root / "f1.csv").string()) == 0;
  ok = ok && run_cmd(fl + (root / "f2.csv").string()) == 0;
  const bool flood_same =
      read_text_file((root / "f1.csv").string()) == read_text_file((root / "f2.csv").string());
  ok = ok && flood_same;
  d << "; flood bytes identical: " << (flood_same ? "yes" : "no");

  ok = ok && run_cmd(cli + " demo-running-example > " + (root / "d1.txt").string()) == 0;
  ok = ok && run_cmd(cli + " demo-running-example > " + (root / "d2.txt").string()) == 0;
  const bool demo_same =
      read_text_file((root / "d1.txt").string()) == read_text_file((root / "d2.txt").string());
  ok = ok && demo_same;
  d << "; walkthrough bytes identical: " << (demo_same ? "yes" : "no");

  return {ok, d.str()};
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    Outcome out;
  };
  std::vector<Entry> results;

  results.push_back({"cascade-statistics", cascade_statistics()});
  results.push_back({"dilution-closed-form", dilution_closed_form_check()});
  results.push_back({"social-only-monotonicity", social_only_monotonicity()});
  results.push_back({"compilation-equivalences", compilation_equivalences()});
  results.push_back({"token-sufficiency", token_sufficiency()});
  results.push_back({"flooding-guarantees", flooding_guarantees()});
  results.push_back({"adversary-bounds", adversary_bounds()});
  const std::vector<RunCapture> corpus = enforced_corpus();
  results.push_back({"flip-accountability", flip_accountability(corpus)});
  results.push_back({"logic-invariants", logic_invariants(corpus)});
  results.push_back({"validation-cost", validation_cost()});
  results.push_back({"cli-determinism", cli_determinism()});

  int failures = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (!r.out.pass) ++failures;
    std::printf("criterion %2zu %-26s %s  %s\n", i + 1, r.name,
                r.out.pass ? "PASS" : "FAIL", r.out.detail.c_str());
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
