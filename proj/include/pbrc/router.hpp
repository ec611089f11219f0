#pragma once

#include <pbrc/contract.hpp>
#include <pbrc/digest.hpp>
#include <pbrc/rng.hpp>

#include <optional>
#include <string>
#include <vector>

namespace pbrc {

struct UnknownLabel : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline const std::string kAnomalyBudget = "validation budget exceeded";
inline const std::string kAnomalyRejected = "certificate rejected";

enum class RouterMode {
  GateOnly,      // agents propose (belief, certificate); router checks and gates
  StateHolding,  // router holds the belief and executes the contract itself
};

struct RouterConfig {
  RouterMode mode = RouterMode::StateHolding;
  // Re-verify certificates before accepting a proposed step (GateOnly).
  bool soundness_check = true;
  // Per-clause, per-step probability that a satisfied trigger is recognized.
  double completeness_probability = 1.0;
  // Max is_valid evaluations per step; exhausting it forces the fallback.
  std::optional<int> validation_budget;
  // Validate tokens in arrival order and stop as soon as the decision is made.
  bool short_circuit = false;
  // Gates also insist the certificate names the highest-priority firing clause.
  bool check_priority = false;
};

// Empty-witness certificates all collapse to the fallback certificate; a
// label without evidence earns no standing.
inline Certificate canonicalize(const Certificate& cert) {
  if (cert.witness.empty()) return fallback_certificate();
  return cert;
}

// Re-derivation of a certificate's claim from the event alone:
//   - every witness id resolves to a token the event actually carried,
//   - each witness token is valid,
//   - the witness set on its own satisfies the named clause's trigger,
//   - optionally, the named clause is the one priority would select.
// Fallback-labeled certificates verify iff they claim no witness.
inline bool verify_certificate(const Contract& c, const Event& e, const Certificate& cert,
                               const ValidityConfig& cfg, bool check_priority = false) {
  if (cert.label == kFallbackLabel) return cert.witness.empty();
  const Clause* clause = nullptr;
  std::size_t clause_idx = 0;
  for (std::size_t j = 0; j < c.clauses.size(); ++j) {
    if (c.clauses[j].trigger.name == cert.label) {
      clause = &c.clauses[j];
      clause_idx = j;
      break;
    }
  }
  if (!clause) throw UnknownLabel("certificate label names no clause: " + cert.label);

  auto witness = resolve_witness(e, cert.witness);
  if (!witness) return false;
  for (const auto& tok : *witness) {
    if (!is_valid(tok, cfg, e.round)) return false;
  }
  if (!eval_trigger_restricted(clause->trigger, e, *witness, cfg)) return false;
  if (check_priority) {
    auto sel = select_clause(c, e, cfg);
    if (!sel || *sel != clause_idx) return false;
  }
  return true;
}

struct StepOutcome {
  Belief belief;
  Certificate certificate;
  bool accepted = false;  // true iff a clause acted (non-fallback step)
  std::optional<std::size_t> fired_clause;
  std::optional<std::string> anomaly;
  int validations = 0;  // is_valid evaluations spent this step
};

namespace detail {

inline StepOutcome fallback_outcome(const Contract& c, const Belief& b, const Event& e,
                                    const ValidityConfig& cfg, std::optional<std::string> anomaly,
                                    int validations) {
  StepOutcome out{apply_op(c.fallback, b, e, cfg, c.hypotheses), fallback_certificate(),
                  false, std::nullopt, std::move(anomaly), validations};
  return out;
}

// Clause recognition misses: with completeness p < 1 each satisfied clause
// is independently overlooked this step with probability 1-p.
inline std::vector<bool> sample_missed(const RouterConfig& rc, std::size_t n_clauses,
                                       Xoshiro256ss& rng) {
  std::vector<bool> missed(n_clauses, false);
  if (rc.completeness_probability < 1.0) {
    for (std::size_t j = 0; j < n_clauses; ++j) {
      missed[j] = !rng.bernoulli(rc.completeness_probability);
    }
  }
  return missed;
}

}  // namespace detail

// State-holding enforcement: the router validates the event's tokens,
// evaluates the contract and applies the selected operator itself. The
// returned outcome reports the new belief, the certificate, and how many
// validity checks were spent.
//
// With short_circuit set, tokens are validated in arrival order and the scan
// stops once the highest-priority recognized clause is already satisfied by
// the tokens validated so far (sound for this trigger language: adding
// tokens never falsifies an existential conjunction). The witness is then
// canonical for the validated prefix, not necessarily for the whole event.
inline StepOutcome enforced_step(const Contract& c, const RouterConfig& rc, const Belief& b,
                                 const Event& e, const ValidityConfig& cfg, Xoshiro256ss& rng) {
  const auto missed = detail::sample_missed(rc, c.clauses.size(), rng);
  const std::vector<Token> arrival = tokens_all(e);

  const auto finish_with = [&](const TokenUniverse& u, int validations) -> StepOutcome {
    std::optional<std::size_t> selected;
    for (std::size_t j = 0; j < c.clauses.size(); ++j) {
      if (missed[j]) continue;
      if (eval_with_universe(c.clauses[j].trigger, u, cfg)) {
        selected = j;
        break;
      }
    }
    if (!selected) return detail::fallback_outcome(c, b, e, cfg, std::nullopt, validations);

    const Clause& cl = c.clauses[*selected];
    auto witness = extract_witness_in_universe(cl.trigger, u, cfg);
    if (!witness || witness->empty()) {
      return detail::fallback_outcome(c, b, e, cfg, kAnomalyNoWitness, validations);
    }
    Certificate cert;
    cert.label = cl.trigger.name;
    cert.witness = witness_ids(*witness);
    return {apply_op(cl.op, b, e, cfg, c.hypotheses), std::move(cert), true, selected,
            std::nullopt, validations};
  };

  if (!rc.short_circuit) {
    if (rc.validation_budget && static_cast<int>(arrival.size()) > *rc.validation_budget) {
      return detail::fallback_outcome(c, b, e, cfg, kAnomalyBudget, *rc.validation_budget);
    }
    return finish_with(make_universe(e, cfg), static_cast<int>(arrival.size()));
  }

  // Short-circuit scan. The partial universe only knows tokens seen so far;
  // the guard and Valid atoms see exactly the validated prefix.
  TokenUniverse partial;
  partial.senders_by_token = detail::sender_map(e);
  partial.now = e.round;
  partial.social_only = true;
  int validations = 0;

  std::optional<std::size_t> target;
  for (std::size_t j = 0; j < c.clauses.size(); ++j) {
    if (!missed[j]) {
      target = j;
      break;
    }
  }

  for (const auto& tok : arrival) {
    if (rc.validation_budget && validations >= *rc.validation_budget) {
      return detail::fallback_outcome(c, b, e, cfg, kAnomalyBudget, validations);
    }
    ++validations;
    const bool ok = is_valid(tok, cfg, e.round);
    auto pos = std::upper_bound(partial.tokens.begin(), partial.tokens.end(), tok,
                                [](const Token& a, const Token& x) { return a.id < x.id; });
    partial.tokens.insert(pos, tok);
    if (ok) {
      partial.valid_ids.insert(tok.id);
      partial.social_only = false;
    }
    if (target && eval_with_universe(c.clauses[*target].trigger, partial, cfg)) {
      return finish_with(partial, validations);
    }
  }
  return finish_with(partial, validations);
}

// Gate enforcement: an agent proposes a belief and a certificate for this
// step; the router applies the contract fallback instead unless the
// certificate canonicalizes to a verified non-fallback decision.
inline StepOutcome enforced_gate(const Contract& c, const RouterConfig& rc, const Belief& current,
                                 const Event& e, const ValidityConfig& cfg,
                                 const Belief& proposed, const Certificate& proposed_cert) {
  const Certificate canon = canonicalize(proposed_cert);
  if (canon.label == kFallbackLabel) {
    return detail::fallback_outcome(c, current, e, cfg, std::nullopt, 0);
  }
  if (rc.soundness_check && !verify_certificate(c, e, canon, cfg, rc.check_priority)) {
    return detail::fallback_outcome(c, current, e, cfg, kAnomalyRejected, 0);
  }
  std::optional<std::size_t> fired;
  for (std::size_t j = 0; j < c.clauses.size(); ++j) {
    if (c.clauses[j].trigger.name == canon.label) fired = j;
  }
  return {proposed, canon, true, fired, std::nullopt, 0};
}

// --- audit log -------------------------------------------------------------

struct AuditError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AttributionViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// A log offered together with an event stream it does not describe.
struct LogEventMismatch : AuditError {
  using AuditError::AuditError;
};

// One enforced step, hash-chained to its predecessor. The first record of
// every log is synthetic (label INIT) and carries the initial belief, so a
// log plus its event stream replays the whole run.
struct AuditRecord {
  std::int64_t round = 0;
  std::string agent;
  std::string event_digest;
  std::vector<std::string> valid_token_ids;
  Certificate certificate;
  std::vector<double> belief_after;
  std::optional<std::string> anomaly;
  std::string prev_hash;
  std::string record_hash;

  bool operator==(const AuditRecord&) const = default;
};

inline json record_body(const AuditRecord& r) {
  json j{{"round", r.round},
         {"agent", r.agent},
         {"event_digest", r.event_digest},
         {"valid_token_ids", r.valid_token_ids},
         {"certificate", to_json(r.certificate)},
         {"belief_after", r.belief_after},
         {"prev_hash", r.prev_hash}};
  j["anomaly"] = r.anomaly ? json(*r.anomaly) : json(nullptr);
  return j;
}

inline std::string record_hash(const AuditRecord& r) {
  return sha256_hex(canonical_dump(record_body(r)));
}

struct AuditLog {
  std::vector<AuditRecord> records;
};

inline AuditLog audit_init(const std::string& agent, const Belief& b0,
                           std::int64_t first_round = 0) {
  AuditRecord r;
  r.round = first_round - 1;
  r.agent = agent;
  r.certificate.label = kInitLabel;
  r.belief_after = b0.weights();
  r.prev_hash = zero_hash();
  r.record_hash = record_hash(r);
  return AuditLog{{std::move(r)}};
}

inline void append_step(AuditLog& log, std::int64_t round, const std::string& agent,
                        const Event& e, const ValidityConfig& cfg, const StepOutcome& out) {
  if (log.records.empty()) throw AuditError("audit log must start with an init record");
  AuditRecord r;
  r.round = round;
  r.agent = agent;
  r.event_digest = event_digest(e);
  for (const auto& tok : tokens_valid(e, cfg)) r.valid_token_ids.push_back(tok.id);
  r.certificate = out.certificate;
  r.belief_after = out.belief.weights();
  r.anomaly = out.anomaly;
  r.prev_hash = log.records.back().record_hash;
  r.record_hash = record_hash(r);
  log.records.push_back(std::move(r));
}

// Index of the first record whose hash or chain link fails, if any.
inline std::optional<std::size_t> verify_audit(const AuditLog& log) {
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const AuditRecord& r = log.records[i];
    if (record_hash(r) != r.record_hash) return i;
    const std::string& expected_prev =
        i == 0 ? zero_hash() : log.records[i - 1].record_hash;
    if (r.prev_hash != expected_prev) return i;
  }
  return std::nullopt;
}

inline json to_json(const AuditRecord& r) {
  json j = record_body(r);
  j["record_hash"] = r.record_hash;
  return j;
}

inline AuditRecord audit_record_from_json(const json& j) {
  AuditRecord r;
  r.round = j.at("round").get<std::int64_t>();
  r.agent = j.at("agent").get<std::string>();
  r.event_digest = j.at("event_digest").get<std::string>();
  r.valid_token_ids = j.at("valid_token_ids").get<std::vector<std::string>>();
  r.certificate = certificate_from_json(j.at("certificate"));
  r.belief_after = j.at("belief_after").get<std::vector<double>>();
  if (!j.at("anomaly").is_null()) r.anomaly = j.at("anomaly").get<std::string>();
  r.prev_hash = j.at("prev_hash").get<std::string>();
  r.record_hash = j.at("record_hash").get<std::string>();
  return r;
}

inline std::string audit_to_jsonl(const AuditLog& log) {
  std::string out;
  for (const auto& r : log.records) {
    out += canonical_dump(to_json(r));
    out += '\n';
  }
  return out;
}

inline AuditLog audit_from_jsonl(const std::string& text) {
  AuditLog log;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    log.records.push_back(audit_record_from_json(json::parse(line)));
  }
  return log;
}

struct FlipAttribution {
  std::int64_t round = 0;
  Certificate certificate;
  std::size_t record_index = 0;
};

// Every step at which the modal hypothesis set changed, with the
// certificate that authorized it. Requires a fallback that never moves the
// argmax on its own; under that precondition a flip bearing a fallback
// certificate is impossible, and encountering one raises
// AttributionViolation: belief moved with no evidence on record.
inline std::vector<FlipAttribution> attribute_flip(const AuditLog& log) {
  std::vector<FlipAttribution> flips;
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    const Belief prev(std::vector<double>(log.records[i - 1].belief_after));
    const Belief next(std::vector<double>(log.records[i].belief_after));
    if (prev.size() != next.size()) throw AuditError("belief dimension changed mid-log");
    if (argmax_set(prev) == argmax_set(next)) continue;
    const Certificate canon = canonicalize(log.records[i].certificate);
    if (canon.label == kFallbackLabel || canon.label == kInitLabel) {
      throw AttributionViolation("argmax changed at round " +
                                 std::to_string(log.records[i].round) +
                                 " under a fallback certificate");
    }
    flips.push_back({log.records[i].round, canon, i});
  }
  return flips;
}

}  // namespace pbrc
