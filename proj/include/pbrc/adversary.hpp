#pragma once

#include <pbrc/contract.hpp>
#include <pbrc/evidence.hpp>
#include <pbrc/rng.hpp>
#include <pbrc/router.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pbrc {

// What an injected token claims about the hypotheses, plus its schema.
struct InjectionShape {
  std::string schema = "ToolResult";
  std::map<std::string, SupportLabel> labels;
  std::string query_digest;
  std::string context_binding;
};

enum class AdversaryKind {
  Unforgeable,  // injects rhetoric and fabricated tags, no key material
  Forging,      // holds a signing secret (possibly the real one)
  Replay,       // re-sends previously observed tokens verbatim
  Omit,         // drops tokens from the stream
  Collude,      // controls a subset of validator identities
  QuerySteer,   // provokes authentic tokens for loaded queries
};

struct AdversaryModel {
  AdversaryKind kind = AdversaryKind::Unforgeable;
  std::string sender = "adversary";
  InjectionShape shape;

  // Forging: the secret used to tag injected tokens.
  std::string forging_key = "guessed-secret";
  // Collude: validator ids whose attestation keys are compromised; the
  // honest secret is what those validators derive their keys from.
  std::vector<std::string> compromised_validators;
  std::string honest_secret;
  // Replay: echo tokens first seen at least this many rounds ago.
  std::int64_t replay_delay = 1;
  // Omit: drop these token ids everywhere; empty set means drop all tokens.
  std::set<std::string> omit_ids;
};

namespace detail {

inline Token injected_token(const AdversaryModel& m, std::int64_t round, int seq) {
  TokenSpec spec;
  spec.id = "adv_" + std::to_string(round) + "_" + std::to_string(seq);
  spec.schema = m.shape.schema;
  spec.payload_digest = sha256_hex("adversarial payload " + spec.id);
  spec.issued_at = round;
  spec.context_binding = m.shape.context_binding;
  spec.query_digest = m.shape.query_digest;
  spec.support_labels = m.shape.labels;
  switch (m.kind) {
    case AdversaryKind::Forging:
      return mint_token(spec, m.forging_key, {"v1"});
    case AdversaryKind::QuerySteer:
      // The attack is in the query, not the tag: the honest pipeline mints a
      // genuine token answering a question the adversary chose.
      return mint_token(spec, m.honest_secret, {"v1"});
    case AdversaryKind::Collude: {
      Token tok = mint_token(spec, m.honest_secret, m.compromised_validators);
      return tok;
    }
    default: {
      // No key material at all: tags are noise.
      Token tok;
      tok.id = spec.id;
      tok.schema = spec.schema;
      tok.payload_digest = spec.payload_digest;
      tok.issued_at = spec.issued_at;
      tok.context_binding = spec.context_binding;
      tok.query_digest = spec.query_digest;
      tok.support_labels = spec.support_labels;
      tok.auth_tag = sha256_hex("fabricated " + spec.id);
      tok.attestations = {{"v1", sha256_hex("fabricated attestation " + spec.id)}};
      return tok;
    }
  }
}

}  // namespace detail

// Rewrites an event stream the way the modeled adversary could. Injection
// kinds append one adversarial message per event; Omit strips tokens in
// place; Replay echoes every token seen at least replay_delay rounds before
// the current event.
inline std::vector<Event> apply_adversary(const AdversaryModel& m, const std::vector<Event>& events) {
  std::vector<Event> out = events;
  if (m.kind == AdversaryKind::Omit) {
    for (auto& e : out) {
      for (auto& msg : e.messages) {
        auto drop = [&](const Token& t) {
          return m.omit_ids.empty() || m.omit_ids.count(t.id) > 0;
        };
        msg.tokens.erase(std::remove_if(msg.tokens.begin(), msg.tokens.end(), drop),
                         msg.tokens.end());
      }
    }
    return out;
  }
  if (m.kind == AdversaryKind::Replay) {
    // first_seen maps token id to the round it first appeared in the
    // original stream.
    std::map<std::string, std::pair<std::int64_t, Token>> archive;
    for (const auto& e : events) {
      for (const auto& t : tokens_all(e)) {
        archive.emplace(t.id, std::make_pair(e.round, t));
      }
    }
    for (auto& e : out) {
      Message replayed;
      replayed.sender = m.sender;
      replayed.recipients = {e.receiver};
      replayed.sent_at = e.round;
      replayed.rhetoric = "as previously established";
      for (const auto& [id, seen] : archive) {
        if (e.round - seen.first >= m.replay_delay) replayed.tokens.push_back(seen.second);
      }
      if (!replayed.tokens.empty()) e.messages.push_back(std::move(replayed));
    }
    return out;
  }
  int seq = 0;
  for (auto& e : out) {
    Message msg;
    msg.sender = m.sender;
    msg.recipients = {e.receiver};
    msg.sent_at = e.round;
    msg.rhetoric = "trust me, the evidence is overwhelming";
    msg.confidence_claim = 0.99;
    msg.tokens.push_back(detail::injected_token(m, e.round, seq++));
    e.messages.push_back(std::move(msg));
  }
  return out;
}

// Chance that at least k of K guessed attestations verify when each guess
// succeeds independently with probability p.
inline double forgery_prob(int attempts, int required, double per_guess) {
  if (required <= 0) return 1.0;
  if (attempts < required) return 0.0;
  if (per_guess <= 0.0) return 0.0;
  if (per_guess >= 1.0) return 1.0;
  double total = 0.0;
  for (int j = required; j <= attempts; ++j) {
    double log_term = std::lgamma(attempts + 1.0) - std::lgamma(j + 1.0) -
                      std::lgamma(attempts - j + 1.0);
    log_term += j * std::log(per_guess) + (attempts - j) * std::log1p(-per_guess);
    total += std::exp(log_term);
  }
  return std::min(total, 1.0);
}

// A quorum of k distinct attestors tolerates f compromised validators
// exactly when k exceeds f.
inline bool f_threshold_safe(int k_required, int compromised) {
  return k_required > compromised;
}

// ---------------------------------------------------------------------------
// Failure localization over an audit trail.

enum class FaultMode {
  RouterUnsound,       // the logged certificate does not re-verify
  ContextualValidity,  // a witness token was outside its freshness window
  EvidenceIntegrity,   // a usable witness token misreports the ground truth
  ContractMisspec,     // evidence was sound; the contract drew the wrong move
};

inline const char* fault_mode_name(FaultMode m) {
  switch (m) {
    case FaultMode::RouterUnsound: return "RouterUnsound";
    case FaultMode::ContextualValidity: return "ContextualValidity";
    case FaultMode::EvidenceIntegrity: return "EvidenceIntegrity";
    case FaultMode::ContractMisspec: return "ContractMisspec";
  }
  return "?";
}

struct GroundTruth {
  std::string correct_hypothesis;
  // When set, witness tokens are additionally held to this freshness window
  // at the round they were used.
  std::optional<std::int64_t> freshness_delta;
};

struct FaultVerdict {
  std::int64_t first_bad_round = 0;  // round whose update left the truth behind
  std::size_t record_index = 0;      // audit record carrying that update
  Certificate certificate;
  std::vector<FaultMode> modes;
};

namespace detail {

inline bool argmax_contains(const Belief& b, std::size_t idx) {
  const auto s = argmax_set(b);
  return std::find(s.begin(), s.end(), idx) != s.end();
}

// A token is truth-sound when it neither contradicts the correct hypothesis
// nor supports a wrong one.
inline bool token_truth_sound(const Token& t, const Contract& c, const std::string& h_star) {
  for (const auto& h : c.hypotheses.labels()) {
    auto it = t.support_labels.find(h);
    if (it == t.support_labels.end()) continue;
    if (h == h_star && it->second == SupportLabel::contradicts) return false;
    if (h != h_star && it->second == SupportLabel::supports) return false;
  }
  return true;
}

}  // namespace detail

// Finds the first step where the agent's top hypothesis moved off the ground
// truth and classifies what went wrong there. events[t] must be the input the
// log's record t+1 answered; record 0 is the initial-state record. Returns
// nullopt when no correct-to-incorrect transition exists.
inline std::optional<FaultVerdict> localize_failure(const AuditLog& log,
                                                    const std::vector<Event>& events,
                                                    const Contract& contract,
                                                    const GroundTruth& truth,
                                                    const ValidityConfig& cfg) {
  if (log.records.empty() || log.records.front().certificate.label != kInitLabel) {
    throw LogEventMismatch("log must start with the initial-state record");
  }
  if (log.records.size() != events.size() + 1) {
    throw LogEventMismatch("log has " + std::to_string(log.records.size()) +
                           " records for " + std::to_string(events.size()) + " events");
  }
  for (std::size_t t = 0; t < events.size(); ++t) {
    if (log.records[t + 1].event_digest != event_digest(events[t]) ||
        log.records[t + 1].round != events[t].round) {
      throw LogEventMismatch("record " + std::to_string(t + 1) +
                             " does not match the supplied event");
    }
  }
  const std::size_t h_star = [&] {
    try {
      return contract.hypotheses.index_of(truth.correct_hypothesis);
    } catch (const UnknownHypothesis&) {
      throw LogEventMismatch("ground-truth hypothesis is not in the contract");
    }
  }();

  for (std::size_t t = 0; t < events.size(); ++t) {
    const Belief before(log.records[t].belief_after);
    const Belief after(log.records[t + 1].belief_after);
    if (!detail::argmax_contains(before, h_star) || detail::argmax_contains(after, h_star)) {
      continue;
    }
    const AuditRecord& rec = log.records[t + 1];
    const Event& ev = events[t];
    const Certificate cert = canonicalize(rec.certificate);
    if (cert.label == kFallbackLabel) {
      throw AttributionViolation("belief left the truth at round " +
                                 std::to_string(rec.round) +
                                 " under a fallback certificate");
    }
    FaultVerdict v;
    v.first_bad_round = rec.round;
    v.record_index = t + 1;
    v.certificate = rec.certificate;

    bool reverifies = false;
    try {
      reverifies = verify_certificate(contract, ev, rec.certificate, cfg);
    } catch (const UnknownLabel&) {
      reverifies = false;
    }
    if (!reverifies) v.modes.push_back(FaultMode::RouterUnsound);
    const auto witness = resolve_witness(ev, rec.certificate.witness);
    if (witness.has_value()) {
      bool stale = false;
      bool tainted = false;
      for (const auto& tok : *witness) {
        const bool fresh = !truth.freshness_delta.has_value() ||
                           is_fresh(tok, ev.round, *truth.freshness_delta);
        if (!fresh) stale = true;
        if (fresh && is_valid(tok, cfg, ev.round) &&
            !detail::token_truth_sound(tok, contract, truth.correct_hypothesis)) {
          tainted = true;
        }
      }
      if (stale) v.modes.push_back(FaultMode::ContextualValidity);
      if (tainted) v.modes.push_back(FaultMode::EvidenceIntegrity);
    }
    if (v.modes.empty()) v.modes.push_back(FaultMode::ContractMisspec);
    return v;
  }
  return std::nullopt;
}

}  // namespace pbrc
