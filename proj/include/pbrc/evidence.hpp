#pragma once

#include <pbrc/digest.hpp>
#include <pbrc/jsonio.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pbrc {

enum class SupportLabel { supports, contradicts, neutral };

inline std::string support_label_name(SupportLabel s) {
  switch (s) {
    case SupportLabel::supports: return "supports";
    case SupportLabel::contradicts: return "contradicts";
    case SupportLabel::neutral: return "neutral";
  }
  throw std::logic_error("bad support label");
}

inline SupportLabel support_label_from(const std::string& s) {
  if (s == "supports") return SupportLabel::supports;
  if (s == "contradicts") return SupportLabel::contradicts;
  if (s == "neutral") return SupportLabel::neutral;
  throw std::invalid_argument("unknown support label: " + s);
}

struct Attestation {
  std::string validator;
  std::string tag;
  bool operator==(const Attestation&) const = default;
};

// Schemas a token can carry. "Synthetic" marks test fixtures.
inline const std::set<std::string>& known_schemas() {
  static const std::set<std::string> s{"ToolResult", "RetrievedSnippet",
                                       "VerifierJudgment", "Synthetic"};
  return s;
}

// Self-authenticating evidence record. The issuer is attestations[0]; its
// tag doubles as auth_tag. Every content field is covered by the tags, so
// any post-issuance edit (including relabeling what the token supports)
// invalidates it; only verbatim replay preserves validity.
struct Token {
  std::string id;
  std::string schema;
  std::string payload_digest;
  std::int64_t issued_at = 0;
  std::string auth_tag;
  std::vector<Attestation> attestations;
  std::string context_binding;                       // empty = unbound
  std::map<std::string, SupportLabel> support_labels;  // hypothesis -> stance
  std::string query_digest;                          // empty = none recorded

  bool operator==(const Token&) const = default;
};

struct ValidityConfig {
  std::string secret_key;
  int k_required = 1;
  std::optional<std::int64_t> freshness_window;  // nullopt = no bound
  bool require_context = false;
  std::set<std::string> allowed_schemas = known_schemas();
  std::optional<std::set<std::string>> allowed_query_digests;  // nullopt = any
};

// Per-validator key material, derived from the shared secret so a single
// config string keys the whole validator population.
inline std::string validator_key(const std::string& secret, const std::string& validator) {
  return hmac_sha256_hex(secret, "validator/" + validator);
}

// Byte string the keyed tags commit to: all content fields, canonically
// serialized. Attestations are excluded (they are the commitment).
inline std::string token_core(const Token& t) {
  json labels = json::object();
  for (const auto& [hyp, stance] : t.support_labels) labels[hyp] = support_label_name(stance);
  json core{{"id", t.id},
            {"schema", t.schema},
            {"payload_digest", t.payload_digest},
            {"issued_at", t.issued_at},
            {"context_binding", t.context_binding},
            {"query_digest", t.query_digest},
            {"support_labels", labels}};
  return canonical_dump(core);
}

inline std::string attestation_tag(const std::string& secret, const std::string& validator,
                                   const Token& t) {
  return hmac_sha256_hex(validator_key(secret, validator), token_core(t));
}

// Content fields of a token-to-be; mint_token adds the tags.
struct TokenSpec {
  std::string id;
  std::string schema = "Synthetic";
  std::string payload_digest;
  std::int64_t issued_at = 0;
  std::string context_binding;
  std::map<std::string, SupportLabel> support_labels;
  std::string query_digest;
};

// Issues a token under the given secret. validators[0] acts as issuer.
inline Token mint_token(const TokenSpec& spec, const std::string& secret,
                        const std::vector<std::string>& validators) {
  if (validators.empty()) throw std::invalid_argument("mint_token: need at least one validator");
  Token t;
  t.id = spec.id;
  t.schema = spec.schema;
  t.payload_digest = spec.payload_digest;
  t.issued_at = spec.issued_at;
  t.context_binding = spec.context_binding;
  t.support_labels = spec.support_labels;
  t.query_digest = spec.query_digest;
  for (const auto& v : validators) {
    t.attestations.push_back({v, attestation_tag(secret, v, t)});
  }
  t.auth_tag = t.attestations.front().tag;
  return t;
}

inline bool query_policy_ok(const Token& t, const ValidityConfig& cfg) {
  return !cfg.allowed_query_digests || cfg.allowed_query_digests->count(t.query_digest) > 0;
}

// Number of distinct validators whose tag on this token verifies.
inline int verified_attestor_count(const Token& t, const ValidityConfig& cfg) {
  std::set<std::string> seen;
  int count = 0;
  for (const auto& a : t.attestations) {
    if (seen.count(a.validator)) continue;
    seen.insert(a.validator);
    if (a.tag == attestation_tag(cfg.secret_key, a.validator, t)) ++count;
  }
  return count;
}

// Structural and cryptographic validity. Deliberately time-invariant: age is
// a separate predicate (is_fresh) so contracts can choose their own windows;
// `now` is accepted for signature stability.
inline bool is_valid(const Token& t, const ValidityConfig& cfg,
                     [[maybe_unused]] std::int64_t now = 0) {
  if (cfg.allowed_schemas.count(t.schema) == 0) return false;
  if (t.attestations.empty()) return false;
  if (t.auth_tag != attestation_tag(cfg.secret_key, t.attestations.front().validator, t)) {
    return false;
  }
  if (verified_attestor_count(t, cfg) < cfg.k_required) return false;
  if (cfg.require_context && t.context_binding.empty()) return false;
  return query_policy_ok(t, cfg);
}

inline bool is_fresh(const Token& t, std::int64_t now, std::optional<std::int64_t> window) {
  return !window || (now - t.issued_at) <= *window;
}

struct Message {
  std::string sender;
  std::vector<std::string> recipients;
  std::int64_t sent_at = 0;
  std::vector<Token> tokens;
  std::string rhetoric;                          // free-form persuasion text
  std::optional<double> confidence_claim;        // sender's asserted confidence

  bool operator==(const Message&) const = default;
};

// Everything one agent receives in one round.
struct Event {
  std::string receiver;
  std::int64_t round = 0;
  std::vector<Message> messages;

  bool operator==(const Event&) const = default;
};

// All tokens in the event, first occurrence order, deduplicated by id.
inline std::vector<Token> tokens_all(const Event& e) {
  std::vector<Token> out;
  std::set<std::string> seen;
  for (const auto& m : e.messages) {
    for (const auto& t : m.tokens) {
      if (seen.insert(t.id).second) out.push_back(t);
    }
  }
  return out;
}

inline std::vector<Token> tokens_valid(const Event& e, const ValidityConfig& cfg) {
  std::vector<Token> out;
  for (const auto& t : tokens_all(e)) {
    if (is_valid(t, cfg, e.round)) out.push_back(t);
  }
  return out;
}

// An event is social-only when it carries no valid token: rhetoric,
// confidence claims and junk tokens only.
inline bool is_social_only(const Event& e, const ValidityConfig& cfg) {
  return tokens_valid(e, cfg).empty();
}

// Quantification domain for trigger evaluation, plus the per-token facts
// atoms can consult. Tokens are held in id order so enumeration (and hence
// witness extraction) is canonical.
struct TokenUniverse {
  std::vector<Token> tokens;
  std::set<std::string> valid_ids;
  std::map<std::string, std::set<std::string>> senders_by_token;
  std::int64_t now = 0;
  bool social_only = true;
};

namespace detail {
inline void sort_by_id(std::vector<Token>& toks) {
  std::sort(toks.begin(), toks.end(),
            [](const Token& a, const Token& b) { return a.id < b.id; });
}

inline std::map<std::string, std::set<std::string>> sender_map(const Event& e) {
  std::map<std::string, std::set<std::string>> m;
  for (const auto& msg : e.messages) {
    for (const auto& t : msg.tokens) m[t.id].insert(msg.sender);
  }
  return m;
}
}  // namespace detail

inline TokenUniverse make_universe(const Event& e, const ValidityConfig& cfg) {
  TokenUniverse u;
  u.tokens = tokens_all(e);
  detail::sort_by_id(u.tokens);
  for (const auto& t : u.tokens) {
    if (is_valid(t, cfg, e.round)) u.valid_ids.insert(t.id);
  }
  u.senders_by_token = detail::sender_map(e);
  u.now = e.round;
  u.social_only = u.valid_ids.empty();
  return u;
}

// Universe restricted to a witness set W: quantifiers range over W only,
// while event-level facts (round, social-only status, senders) are kept
// from the full event.
inline TokenUniverse restricted_universe(const Event& e, const std::vector<Token>& witness,
                                         const ValidityConfig& cfg) {
  TokenUniverse full = make_universe(e, cfg);
  TokenUniverse u;
  u.tokens = witness;
  detail::sort_by_id(u.tokens);
  for (const auto& t : u.tokens) {
    if (is_valid(t, cfg, e.round)) u.valid_ids.insert(t.id);
  }
  u.senders_by_token = full.senders_by_token;
  u.now = e.round;
  u.social_only = full.social_only;
  return u;
}

// --- JSON forms ------------------------------------------------------------

inline json to_json(const Attestation& a) { return json{{"validator", a.validator}, {"tag", a.tag}}; }

inline json to_json(const Token& t) {
  json labels = json::object();
  for (const auto& [hyp, stance] : t.support_labels) labels[hyp] = support_label_name(stance);
  json atts = json::array();
  for (const auto& a : t.attestations) atts.push_back(to_json(a));
  return json{{"id", t.id},
              {"schema", t.schema},
              {"payload_digest", t.payload_digest},
              {"issued_at", t.issued_at},
              {"auth_tag", t.auth_tag},
              {"attestations", atts},
              {"context_binding", t.context_binding},
              {"support_labels", labels},
              {"query_digest", t.query_digest}};
}

inline Token token_from_json(const json& j) {
  Token t;
  t.id = j.at("id").get<std::string>();
  t.schema = j.at("schema").get<std::string>();
  t.payload_digest = j.at("payload_digest").get<std::string>();
  t.issued_at = j.at("issued_at").get<std::int64_t>();
  t.auth_tag = j.at("auth_tag").get<std::string>();
  for (const auto& a : j.at("attestations")) {
    t.attestations.push_back({a.at("validator").get<std::string>(), a.at("tag").get<std::string>()});
  }
  t.context_binding = j.value("context_binding", std::string{});
  if (j.contains("support_labels")) {
    for (const auto& [hyp, stance] : j.at("support_labels").items()) {
      t.support_labels[hyp] = support_label_from(stance.get<std::string>());
    }
  }
  t.query_digest = j.value("query_digest", std::string{});
  return t;
}

inline json to_json(const Message& m) {
  json toks = json::array();
  for (const auto& t : m.tokens) toks.push_back(to_json(t));
  json out{{"sender", m.sender},
           {"recipients", m.recipients},
           {"sent_at", m.sent_at},
           {"tokens", toks},
           {"rhetoric", m.rhetoric}};
  if (m.confidence_claim) out["confidence_claim"] = *m.confidence_claim;
  return out;
}

inline Message message_from_json(const json& j) {
  Message m;
  m.sender = j.at("sender").get<std::string>();
  if (j.contains("recipients")) m.recipients = j.at("recipients").get<std::vector<std::string>>();
  m.sent_at = j.value("sent_at", std::int64_t{0});
  for (const auto& t : j.at("tokens")) m.tokens.push_back(token_from_json(t));
  m.rhetoric = j.value("rhetoric", std::string{});
  if (j.contains("confidence_claim")) m.confidence_claim = j.at("confidence_claim").get<double>();
  return m;
}

inline json to_json(const Event& e) {
  json msgs = json::array();
  for (const auto& m : e.messages) msgs.push_back(to_json(m));
  return json{{"receiver", e.receiver}, {"round", e.round}, {"messages", msgs}};
}

inline Event event_from_json(const json& j) {
  Event e;
  e.receiver = j.at("receiver").get<std::string>();
  e.round = j.at("round").get<std::int64_t>();
  for (const auto& m : j.at("messages")) e.messages.push_back(message_from_json(m));
  return e;
}

inline std::string token_digest(const Token& t) { return sha256_hex(canonical_dump(to_json(t))); }
inline std::string event_digest(const Event& e) { return sha256_hex(canonical_dump(to_json(e))); }

}  // namespace pbrc
