#pragma once

#include <pbrc/evidence.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pbrc {

struct MalformedTrigger : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Atomic predicates over tokens. All are determined by token content plus
// event-level facts (round, query policy), except SenderIs, which inspects
// who delivered the token and therefore breaks token-determinedness; it
// exists to demonstrate exactly that and is refused by the standard loader.
enum class Pred {
  Valid,
  Fresh,
  Supports,
  Contradicts,
  TypeIs,
  AttestCountAtLeast,
  QueryOK,
  TokenDistinct,
  SenderIs,
};

struct TriggerAtom {
  Pred pred{};
  std::string var;    // token variable
  std::string var2;   // TokenDistinct only
  std::string text;   // hypothesis / schema / agent constant
  std::int64_t number = 0;  // Fresh window or attestation count

  bool operator==(const TriggerAtom&) const = default;
};

inline TriggerAtom atom_valid(std::string var) { return {Pred::Valid, std::move(var), "", "", 0}; }
inline TriggerAtom atom_fresh(std::string var, std::int64_t window) {
  return {Pred::Fresh, std::move(var), "", "", window};
}
inline TriggerAtom atom_supports(std::string var, std::string hyp) {
  return {Pred::Supports, std::move(var), "", std::move(hyp), 0};
}
inline TriggerAtom atom_contradicts(std::string var, std::string hyp) {
  return {Pred::Contradicts, std::move(var), "", std::move(hyp), 0};
}
inline TriggerAtom atom_type_is(std::string var, std::string schema) {
  return {Pred::TypeIs, std::move(var), "", std::move(schema), 0};
}
inline TriggerAtom atom_attest_count(std::string var, std::int64_t k) {
  return {Pred::AttestCountAtLeast, std::move(var), "", "", k};
}
inline TriggerAtom atom_query_ok(std::string var) { return {Pred::QueryOK, std::move(var), "", "", 0}; }
inline TriggerAtom atom_distinct(std::string var, std::string var2) {
  return {Pred::TokenDistinct, std::move(var), std::move(var2), "", 0};
}
inline TriggerAtom atom_sender_is(std::string var, std::string agent) {
  return {Pred::SenderIs, std::move(var), "", std::move(agent), 0};
}

// Existential conjunction over token variables: "there exist tokens
// t1..tk in the event such that every atom holds". require_nonsocial
// additionally demands the event carry at least one valid token; guarded
// triggers can never fire on purely social input.
struct Trigger {
  std::string name;
  std::vector<std::string> vars;
  std::vector<TriggerAtom> atoms;
  bool require_nonsocial = false;

  bool operator==(const Trigger&) const = default;
};

inline void validate_trigger(const Trigger& t) {
  if (t.name.empty()) throw MalformedTrigger("trigger needs a name");
  std::set<std::string> declared(t.vars.begin(), t.vars.end());
  if (declared.size() != t.vars.size()) throw MalformedTrigger("duplicate trigger variable");
  for (const auto& a : t.atoms) {
    if (a.var.empty() || declared.count(a.var) == 0) {
      throw MalformedTrigger("atom references undeclared variable in trigger " + t.name);
    }
    if (a.pred == Pred::TokenDistinct && declared.count(a.var2) == 0) {
      throw MalformedTrigger("TokenDistinct references undeclared variable in trigger " + t.name);
    }
    if (a.pred == Pred::Fresh && a.number < 0) {
      throw MalformedTrigger("freshness window must be nonnegative in trigger " + t.name);
    }
  }
}

// Syntactic evidentiality: at least one variable, and every variable is
// pinned down by a Valid atom. Zero-variable triggers are expressible (they
// fire on any event) but are not evidential.
inline bool is_evidential_trigger(const Trigger& t) {
  if (t.vars.empty()) return false;
  std::set<std::string> valid_vars;
  for (const auto& a : t.atoms) {
    if (a.pred == Pred::Valid) valid_vars.insert(a.var);
  }
  for (const auto& v : t.vars) {
    if (valid_vars.count(v) == 0) return false;
  }
  return true;
}

namespace detail {

struct ValidityView {
  const ValidityConfig* cfg;
};

inline bool eval_atom(const TriggerAtom& a, const TokenUniverse& u, const ValidityView& vv,
                      const std::map<std::string, const Token*>& bound) {
  const Token& tok = *bound.at(a.var);
  switch (a.pred) {
    case Pred::Valid:
      return u.valid_ids.count(tok.id) > 0;
    case Pred::Fresh:
      return is_fresh(tok, u.now, a.number);
    case Pred::Supports: {
      auto it = tok.support_labels.find(a.text);
      return it != tok.support_labels.end() && it->second == SupportLabel::supports;
    }
    case Pred::Contradicts: {
      auto it = tok.support_labels.find(a.text);
      return it != tok.support_labels.end() && it->second == SupportLabel::contradicts;
    }
    case Pred::TypeIs:
      return tok.schema == a.text;
    case Pred::AttestCountAtLeast:
      return verified_attestor_count(tok, *vv.cfg) >= a.number;
    case Pred::QueryOK:
      return query_policy_ok(tok, *vv.cfg);
    case Pred::TokenDistinct:
      return tok.id != bound.at(a.var2)->id;
    case Pred::SenderIs: {
      auto it = u.senders_by_token.find(tok.id);
      return it != u.senders_by_token.end() && it->second.count(a.text) > 0;
    }
  }
  throw std::logic_error("bad predicate");
}

// Backtracking search over assignments of variables to universe tokens, in
// id order at every level, checking each atom as soon as its variables are
// bound. Because the domain is id-sorted and the search is depth-first, the
// first full assignment found is the lexicographically least satisfying
// assignment; on_hit receives it and says whether to keep searching.
// Returns true iff the search was stopped by on_hit. Callers handle the
// zero-variable case themselves.
template <typename OnHit>
bool search_assignments(const Trigger& t, const TokenUniverse& u, const ValidityConfig& cfg,
                        OnHit&& on_hit) {
  validate_trigger(t);
  if (t.require_nonsocial && u.social_only) return false;

  // Atoms grouped by the latest variable position they mention.
  std::map<std::string, std::size_t> var_pos;
  for (std::size_t i = 0; i < t.vars.size(); ++i) var_pos[t.vars[i]] = i;
  std::vector<std::vector<const TriggerAtom*>> ready_at(t.vars.size() + 1);
  for (const auto& a : t.atoms) {
    std::size_t pos = var_pos.at(a.var);
    if (a.pred == Pred::TokenDistinct) pos = std::max(pos, var_pos.at(a.var2));
    ready_at[pos + 1].push_back(&a);
  }

  ValidityView vv{&cfg};
  std::map<std::string, const Token*> bound;
  bool stop = false;

  auto rec = [&](auto&& self, std::size_t depth) -> void {
    if (stop) return;
    for (const TriggerAtom* a : ready_at[depth]) {
      if (!eval_atom(*a, u, vv, bound)) return;
    }
    if (depth == t.vars.size()) {
      if (!on_hit(bound)) stop = true;
      return;
    }
    for (const Token& tok : u.tokens) {
      bound[t.vars[depth]] = &tok;
      self(self, depth + 1);
      if (stop) return;
    }
    bound.erase(t.vars[depth]);
  };

  rec(rec, 0);
  return stop;
}

}  // namespace detail

inline bool eval_with_universe(const Trigger& t, const TokenUniverse& u, const ValidityConfig& cfg) {
  if (t.vars.empty()) {
    validate_trigger(t);
    return !(t.require_nonsocial && u.social_only);
  }
  return detail::search_assignments(t, u, cfg, [](const auto&) { return false; });
}

// Does the event satisfy the trigger? Quantifiers range over every token in
// the event, valid or not; validity only enters through Valid atoms.
inline bool eval_trigger(const Trigger& t, const Event& e, const ValidityConfig& cfg) {
  return eval_with_universe(t, make_universe(e, cfg), cfg);
}

// Satisfaction with quantifiers restricted to the witness set W. Event-level
// facts are unchanged, so this asks: does W alone already witness t on e?
inline bool eval_trigger_restricted(const Trigger& t, const Event& e,
                                    const std::vector<Token>& witness,
                                    const ValidityConfig& cfg) {
  return eval_with_universe(t, restricted_universe(e, witness, cfg), cfg);
}

using WitnessSet = std::vector<Token>;  // id-sorted, unique ids

inline std::vector<std::string> witness_ids(const WitnessSet& w) {
  std::vector<std::string> ids;
  for (const auto& t : w) ids.push_back(t.id);
  return ids;
}

// Witness search within an already-built universe: the domain is narrowed
// to the universe's valid tokens and the first satisfying assignment's
// token set is returned.
inline std::optional<WitnessSet> extract_witness_in_universe(const Trigger& t,
                                                             const TokenUniverse& u,
                                                             const ValidityConfig& cfg) {
  if (t.vars.empty()) {
    validate_trigger(t);
    if (t.require_nonsocial && u.social_only) return std::nullopt;
    return WitnessSet{};
  }
  TokenUniverse valid_only;
  for (const auto& tok : u.tokens) {
    if (u.valid_ids.count(tok.id) > 0) valid_only.tokens.push_back(tok);
  }
  valid_only.valid_ids = u.valid_ids;
  valid_only.senders_by_token = u.senders_by_token;
  valid_only.now = u.now;
  valid_only.social_only = u.social_only;

  std::optional<WitnessSet> result;
  detail::search_assignments(t, valid_only, cfg, [&](const std::map<std::string, const Token*>& bound) {
    std::map<std::string, Token> by_id;
    for (const auto& [var, tok] : bound) by_id[tok->id] = *tok;
    WitnessSet w;
    for (auto& [id, tok] : by_id) w.push_back(std::move(tok));
    result = std::move(w);
    return false;  // first satisfying assignment is canonical
  });
  return result;
}

// Canonical witness: variables are assigned over the event's *valid* tokens
// in id order and the first satisfying assignment wins; the witness is that
// assignment's token set. Consequences: every witness token is valid, the
// witness has at most one token per variable, and the result depends only
// on the set of tokens in the event, not on message order or rhetoric.
// Returns nullopt when the trigger does not fire, and also when it fires
// only by way of invalid tokens (no assignment over valid tokens works).
inline std::optional<WitnessSet> extract_witness(const Trigger& t, const Event& e,
                                                 const ValidityConfig& cfg) {
  if (!eval_trigger(t, e, cfg)) return std::nullopt;
  return extract_witness_in_universe(t, make_universe(e, cfg), cfg);
}

// --- JSON forms ------------------------------------------------------------

inline std::string pred_name(Pred p) {
  switch (p) {
    case Pred::Valid: return "valid";
    case Pred::Fresh: return "fresh";
    case Pred::Supports: return "supports";
    case Pred::Contradicts: return "contradicts";
    case Pred::TypeIs: return "type_is";
    case Pred::AttestCountAtLeast: return "attest_count_at_least";
    case Pred::QueryOK: return "query_ok";
    case Pred::TokenDistinct: return "token_distinct";
    case Pred::SenderIs: return "sender_is";
  }
  throw std::logic_error("bad predicate");
}

inline json to_json(const TriggerAtom& a) {
  json j{{"pred", pred_name(a.pred)}, {"var", a.var}};
  switch (a.pred) {
    case Pred::Fresh: j["window"] = a.number; break;
    case Pred::Supports:
    case Pred::Contradicts: j["hypothesis"] = a.text; break;
    case Pred::TypeIs: j["schema"] = a.text; break;
    case Pred::AttestCountAtLeast: j["count"] = a.number; break;
    case Pred::TokenDistinct: j["var2"] = a.var2; break;
    case Pred::SenderIs: j["agent"] = a.text; break;
    default: break;
  }
  return j;
}

inline json to_json(const Trigger& t) {
  json atoms = json::array();
  for (const auto& a : t.atoms) atoms.push_back(to_json(a));
  return json{{"name", t.name},
              {"vars", t.vars},
              {"atoms", atoms},
              {"require_nonsocial", t.require_nonsocial}};
}

// allow_sender_atoms exists for adversarial test fixtures only; production
// contracts must confine themselves to token-determined predicates.
inline TriggerAtom atom_from_json(const json& j, bool allow_sender_atoms = false) {
  const std::string pred = j.at("pred").get<std::string>();
  const std::string var = j.at("var").get<std::string>();
  if (pred == "valid") return atom_valid(var);
  if (pred == "fresh") return atom_fresh(var, j.at("window").get<std::int64_t>());
  if (pred == "supports") return atom_supports(var, j.at("hypothesis").get<std::string>());
  if (pred == "contradicts") return atom_contradicts(var, j.at("hypothesis").get<std::string>());
  if (pred == "type_is") return atom_type_is(var, j.at("schema").get<std::string>());
  if (pred == "attest_count_at_least") return atom_attest_count(var, j.at("count").get<std::int64_t>());
  if (pred == "query_ok") return atom_query_ok(var);
  if (pred == "token_distinct") return atom_distinct(var, j.at("var2").get<std::string>());
  if (pred == "sender_is") {
    if (!allow_sender_atoms) {
      throw MalformedTrigger("sender_is atoms are not token-determined and are refused here");
    }
    return atom_sender_is(var, j.at("agent").get<std::string>());
  }
  throw MalformedTrigger("unknown predicate: " + pred);
}

inline Trigger trigger_from_json(const json& j, bool allow_sender_atoms = false) {
  Trigger t;
  t.name = j.at("name").get<std::string>();
  t.vars = j.at("vars").get<std::vector<std::string>>();
  for (const auto& a : j.at("atoms")) t.atoms.push_back(atom_from_json(a, allow_sender_atoms));
  t.require_nonsocial = j.value("require_nonsocial", false);
  validate_trigger(t);
  return t;
}

}  // namespace pbrc
