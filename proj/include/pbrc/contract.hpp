#pragma once

#include <pbrc/belief.hpp>
#include <pbrc/trigger.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pbrc {

struct MalformedContract : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Contract;

enum class OpKind { LogOdds, Dilute, Identity, MassShift, NfFallback };

// Belief update operator. NfFallback only appears as the fallback of a
// normalized contract: on social-only events it replays the original
// contract's unrestricted one-step behavior, otherwise it applies the
// original fallback.
struct UpdateOp {
  OpKind kind = OpKind::Identity;
  std::string target;      // LogOdds, MassShift
  double step = 0.0;       // LogOdds
  double cap = 0.0;        // LogOdds
  double rate = 0.0;       // Dilute
  double fraction = 0.0;   // MassShift
  std::shared_ptr<const Contract> replay;  // NfFallback

  bool operator==(const UpdateOp& other) const;
};

inline UpdateOp op_log_odds(std::string target, double step, double cap) {
  UpdateOp op;
  op.kind = OpKind::LogOdds;
  op.target = std::move(target);
  op.step = step;
  op.cap = cap;
  return op;
}

inline UpdateOp op_dilute(double rate) {
  UpdateOp op;
  op.kind = OpKind::Dilute;
  op.rate = rate;
  return op;
}

inline UpdateOp op_identity() { return UpdateOp{}; }

inline UpdateOp op_mass_shift(std::string target, double fraction) {
  UpdateOp op;
  op.kind = OpKind::MassShift;
  op.target = std::move(target);
  op.fraction = fraction;
  return op;
}

struct Clause {
  Trigger trigger;
  UpdateOp op;
  bool operator==(const Clause&) const = default;
};

// Reserved certificate label for steps decided by the fallback; no clause
// may use it as a trigger name. INIT marks the synthetic first audit record.
inline const std::string kFallbackLabel = "FALLBACK";
inline const std::string kInitLabel = "INIT";

// Anomaly note for a clause that fired but produced no usable witness.
inline const std::string kAnomalyNoWitness = "trigger fired without a usable witness";

// Preregistered revision policy: ordered clauses (earlier = higher priority)
// plus a fallback applied when nothing fires.
struct Contract {
  std::string name;
  HypothesisSpace hypotheses{std::vector<std::string>{"h0", "h1"}};
  std::vector<Clause> clauses;
  UpdateOp fallback = op_dilute(0.1);

  bool operator==(const Contract&) const = default;
};

inline bool UpdateOp::operator==(const UpdateOp& other) const {
  if (kind != other.kind || target != other.target || step != other.step || cap != other.cap ||
      rate != other.rate || fraction != other.fraction) {
    return false;
  }
  if (!replay && !other.replay) return true;
  return replay && other.replay && *replay == *other.replay;
}

inline void validate_op(const UpdateOp& op, const HypothesisSpace& hs) {
  switch (op.kind) {
    case OpKind::LogOdds:
      hs.index_of(op.target);
      LogOddsStep(0, op.step, op.cap);  // reuses the numeric validation
      return;
    case OpKind::Dilute:
      DilutionParams(op.rate);
      return;
    case OpKind::Identity:
      return;
    case OpKind::MassShift:
      hs.index_of(op.target);
      if (!(op.fraction >= 0.0) || !(op.fraction <= 1.0)) {
        throw MalformedContract("mass-shift fraction must lie in [0,1]");
      }
      return;
    case OpKind::NfFallback:
      if (!op.replay) throw MalformedContract("normalized fallback needs its original contract");
      return;
  }
  throw MalformedContract("unknown operator kind");
}

inline void validate_contract(const Contract& c) {
  if (c.name.empty()) throw MalformedContract("contract needs a name");
  std::set<std::string> names;
  for (const auto& cl : c.clauses) {
    validate_trigger(cl.trigger);
    if (cl.trigger.name == kFallbackLabel || cl.trigger.name == kInitLabel) {
      throw MalformedContract("clause name collides with a reserved label");
    }
    if (!names.insert(cl.trigger.name).second) {
      throw MalformedContract("duplicate clause name: " + cl.trigger.name);
    }
    validate_op(cl.op, c.hypotheses);
  }
  validate_op(c.fallback, c.hypotheses);
}

// A contract is evidential when every clause trigger is. Clause-free
// contracts are vacuously evidential.
inline bool is_evidential(const Contract& c) {
  for (const auto& cl : c.clauses) {
    if (!is_evidential_trigger(cl.trigger)) return false;
  }
  return true;
}

// True only for operators that can never move the modal hypothesis.
inline bool is_argmax_preserving(const UpdateOp& op) {
  return op.kind == OpKind::Dilute || op.kind == OpKind::Identity;
}

// Indices of clauses whose trigger fires on the event, ascending.
inline std::vector<std::size_t> trigger_set(const Contract& c, const Event& e,
                                            const ValidityConfig& cfg) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < c.clauses.size(); ++j) {
    if (eval_trigger(c.clauses[j].trigger, e, cfg)) out.push_back(j);
  }
  return out;
}

// Highest-priority firing clause, if any.
inline std::optional<std::size_t> select_clause(const Contract& c, const Event& e,
                                                const ValidityConfig& cfg) {
  auto js = trigger_set(c, e, cfg);
  if (js.empty()) return std::nullopt;
  return js.front();
}

// Update-step certificate: which clause (by trigger name, or FALLBACK)
// decided the step, and the ids of the witness tokens. The tokens
// themselves live in the event stream; auditors re-resolve them by id so a
// certificate cannot smuggle in content the event never carried.
struct Certificate {
  std::string label = kFallbackLabel;
  std::vector<std::string> witness;  // sorted unique token ids

  bool operator==(const Certificate&) const = default;
};

inline Certificate fallback_certificate() { return Certificate{}; }

inline std::optional<std::vector<Token>> resolve_witness(const Event& e,
                                                         const std::vector<std::string>& ids) {
  auto all = tokens_all(e);
  std::vector<Token> out;
  for (const auto& id : ids) {
    auto it = std::find_if(all.begin(), all.end(), [&](const Token& t) { return t.id == id; });
    if (it == all.end()) return std::nullopt;
    out.push_back(*it);
  }
  return out;
}

struct UpdateResult {
  Belief belief;
  Certificate certificate;
  std::optional<std::size_t> fired_clause;  // index into clauses, nullopt = fallback
  std::optional<std::string> anomaly;
};

using WitnessExtractor = std::function<std::optional<WitnessSet>(
    const Trigger&, const Event&, const ValidityConfig&)>;

inline std::optional<WitnessSet> canonical_extractor(const Trigger& t, const Event& e,
                                                     const ValidityConfig& cfg) {
  return extract_witness(t, e, cfg);
}

namespace detail {
Belief apply_op_impl(const UpdateOp& op, const Belief& b, const Event& e,
                     const ValidityConfig& cfg, const HypothesisSpace& hs);
}

// One unrestricted update step: the highest-priority firing clause acts, the
// fallback acts when nothing fires. The certificate records the decision and
// whatever witness the extractor produced (possibly none). Nothing here
// blocks on a missing witness; that is the certified variant's job.
inline UpdateResult raw_update(const Contract& c, const Belief& b, const Event& e,
                               const ValidityConfig& cfg,
                               const WitnessExtractor& extractor = canonical_extractor) {
  auto j = select_clause(c, e, cfg);
  if (!j) {
    return {detail::apply_op_impl(c.fallback, b, e, cfg, c.hypotheses), fallback_certificate(),
            std::nullopt, std::nullopt};
  }
  const Clause& cl = c.clauses[*j];
  Certificate cert;
  cert.label = cl.trigger.name;
  if (auto w = extractor(cl.trigger, e, cfg)) cert.witness = witness_ids(*w);
  return {detail::apply_op_impl(cl.op, b, e, cfg, c.hypotheses), std::move(cert), j, std::nullopt};
}

// Certified update step: a clause may only act on the strength of a
// nonempty witness. A firing clause without one devolves to the fallback
// and flags the anomaly, so belief-moving steps always carry evidence.
inline UpdateResult contract_update(const Contract& c, const Belief& b, const Event& e,
                                    const ValidityConfig& cfg,
                                    const WitnessExtractor& extractor = canonical_extractor) {
  auto j = select_clause(c, e, cfg);
  if (!j) {
    return {detail::apply_op_impl(c.fallback, b, e, cfg, c.hypotheses), fallback_certificate(),
            std::nullopt, std::nullopt};
  }
  const Clause& cl = c.clauses[*j];
  auto w = extractor(cl.trigger, e, cfg);
  if (!w || w->empty()) {
    return {detail::apply_op_impl(c.fallback, b, e, cfg, c.hypotheses), fallback_certificate(),
            std::nullopt, kAnomalyNoWitness};
  }
  Certificate cert;
  cert.label = cl.trigger.name;
  cert.witness = witness_ids(*w);
  return {detail::apply_op_impl(cl.op, b, e, cfg, c.hypotheses), std::move(cert), j, std::nullopt};
}

namespace detail {
inline Belief apply_op_impl(const UpdateOp& op, const Belief& b, const Event& e,
                            const ValidityConfig& cfg, const HypothesisSpace& hs) {
  switch (op.kind) {
    case OpKind::LogOdds:
      return logodds_update(b, LogOddsStep(hs.index_of(op.target), op.step, op.cap));
    case OpKind::Dilute:
      return dilute(b, DilutionParams(op.rate));
    case OpKind::Identity:
      return b;
    case OpKind::MassShift:
      return mass_shift(b, hs.index_of(op.target), op.fraction);
    case OpKind::NfFallback: {
      if (!op.replay) throw MalformedContract("normalized fallback without original");
      if (is_social_only(e, cfg)) return raw_update(*op.replay, b, e, cfg).belief;
      return apply_op_impl(op.replay->fallback, b, e, cfg, op.replay->hypotheses);
    }
  }
  throw MalformedContract("unknown operator kind");
}
}  // namespace detail

inline Belief apply_op(const UpdateOp& op, const Belief& b, const Event& e,
                       const ValidityConfig& cfg, const HypothesisSpace& hs) {
  return detail::apply_op_impl(op, b, e, cfg, hs);
}

// Evidence-gating pass: every trigger additionally requires the event to
// carry at least one valid token. Idempotent; the fallback is untouched.
inline Contract compile_eg(const Contract& c) {
  Contract out = c;
  for (auto& cl : out.clauses) cl.trigger.require_nonsocial = true;
  return out;
}

// Normalization pass: triggers get the nonsocial guard, and the fallback is
// replaced by one that replays the original contract's unrestricted step on
// social-only events (so normalization changes certificates, never beliefs).
inline Contract compile_nf(const Contract& c) {
  Contract out = compile_eg(c);
  UpdateOp fb;
  fb.kind = OpKind::NfFallback;
  fb.replay = std::make_shared<const Contract>(c);
  out.fallback = fb;
  return out;
}

// --- JSON forms ------------------------------------------------------------

inline json to_json(const Certificate& cert) {
  return json{{"label", cert.label}, {"witness", cert.witness}};
}

inline Certificate certificate_from_json(const json& j) {
  Certificate c;
  c.label = j.at("label").get<std::string>();
  c.witness = j.at("witness").get<std::vector<std::string>>();
  return c;
}

json to_json(const Contract& c);

inline json to_json(const UpdateOp& op) {
  switch (op.kind) {
    case OpKind::LogOdds:
      return json{{"kind", "log_odds"}, {"target", op.target}, {"step", op.step}, {"cap", op.cap}};
    case OpKind::Dilute:
      return json{{"kind", "dilute"}, {"rate", op.rate}};
    case OpKind::Identity:
      return json{{"kind", "identity"}};
    case OpKind::MassShift:
      return json{{"kind", "mass_shift"}, {"target", op.target}, {"fraction", op.fraction}};
    case OpKind::NfFallback:
      return json{{"kind", "nf_fallback"}, {"original", to_json(*op.replay)}};
  }
  throw MalformedContract("unknown operator kind");
}

Contract contract_from_json(const json& j, bool allow_sender_atoms);

inline UpdateOp op_from_json(const json& j, bool allow_sender_atoms = false) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "log_odds") {
    return op_log_odds(j.at("target").get<std::string>(), j.at("step").get<double>(),
                       j.at("cap").get<double>());
  }
  if (kind == "dilute") return op_dilute(j.at("rate").get<double>());
  if (kind == "identity") return op_identity();
  if (kind == "mass_shift") {
    return op_mass_shift(j.at("target").get<std::string>(), j.at("fraction").get<double>());
  }
  if (kind == "nf_fallback") {
    UpdateOp op;
    op.kind = OpKind::NfFallback;
    op.replay = std::make_shared<const Contract>(
        contract_from_json(j.at("original"), allow_sender_atoms));
    return op;
  }
  throw MalformedContract("unknown operator kind: " + kind);
}

inline json to_json(const Contract& c) {
  json clauses = json::array();
  for (const auto& cl : c.clauses) {
    clauses.push_back(json{{"trigger", to_json(cl.trigger)}, {"op", to_json(cl.op)}});
  }
  return json{{"name", c.name},
              {"hypotheses", c.hypotheses.labels()},
              {"clauses", clauses},
              {"fallback", to_json(c.fallback)}};
}

inline Contract contract_from_json(const json& j, bool allow_sender_atoms = false) {
  Contract c;
  c.name = j.at("name").get<std::string>();
  c.hypotheses = HypothesisSpace(j.at("hypotheses").get<std::vector<std::string>>());
  for (const auto& cl : j.at("clauses")) {
    c.clauses.push_back({trigger_from_json(cl.at("trigger"), allow_sender_atoms),
                         op_from_json(cl.at("op"), allow_sender_atoms)});
  }
  c.fallback = op_from_json(j.at("fallback"), allow_sender_atoms);
  validate_contract(c);
  return c;
}

}  // namespace pbrc
