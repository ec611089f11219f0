#pragma once

#include <pbrc/contract.hpp>
#include <pbrc/evidence.hpp>
#include <pbrc/router.hpp>

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pbrc {

// Propositional dynamic logic with one doxastic modality per agent, model
// checked over finite state abstractions of deliberation runs.

struct CddlError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct KD45Violation : CddlError {
  using CddlError::CddlError;
};
struct ParseError : CddlError {
  using CddlError::CddlError;
};

struct Formula;
struct Program;
using FormulaPtr = std::shared_ptr<const Formula>;
using ProgramPtr = std::shared_ptr<const Program>;

enum class FKind { Atom, Not, And, Believes, Box };
enum class PKind { Act, Seq, Choice, Test, Star };

struct Formula {
  FKind kind = FKind::Atom;
  std::string atom;                // Atom
  std::vector<FormulaPtr> kids;    // Not (one), And (any number)
  std::string agent;               // Believes
  ProgramPtr prog;                 // Box
};

struct Program {
  PKind kind = PKind::Act;
  std::string action;   // Act
  ProgramPtr left;      // Seq, Choice, Star
  ProgramPtr right;     // Seq, Choice
  FormulaPtr test;      // Test
};

inline FormulaPtr f_atom(std::string name) {
  auto f = std::make_shared<Formula>();
  f->atom = std::move(name);
  return f;
}
inline FormulaPtr f_not(FormulaPtr x) {
  auto f = std::make_shared<Formula>();
  f->kind = FKind::Not;
  f->kids = {std::move(x)};
  return f;
}
inline FormulaPtr f_and(std::vector<FormulaPtr> xs) {
  auto f = std::make_shared<Formula>();
  f->kind = FKind::And;
  f->kids = std::move(xs);
  return f;
}
inline FormulaPtr f_believes(std::string agent, FormulaPtr x) {
  auto f = std::make_shared<Formula>();
  f->kind = FKind::Believes;
  f->agent = std::move(agent);
  f->kids = {std::move(x)};
  return f;
}
inline FormulaPtr f_box(ProgramPtr p, FormulaPtr x) {
  auto f = std::make_shared<Formula>();
  f->kind = FKind::Box;
  f->prog = std::move(p);
  f->kids = {std::move(x)};
  return f;
}

// Derived connectives. The empty conjunction is truth, so f_or({}) is falsity.
inline FormulaPtr f_true() { return f_and({}); }
inline FormulaPtr f_false() { return f_not(f_true()); }
inline FormulaPtr f_or(std::vector<FormulaPtr> xs) {
  std::vector<FormulaPtr> negs;
  negs.reserve(xs.size());
  for (auto& x : xs) negs.push_back(f_not(std::move(x)));
  return f_not(f_and(std::move(negs)));
}
inline FormulaPtr f_implies(FormulaPtr a, FormulaPtr b) {
  return f_not(f_and({std::move(a), f_not(std::move(b))}));
}
inline FormulaPtr f_diamond(ProgramPtr p, FormulaPtr x) {
  return f_not(f_box(std::move(p), f_not(std::move(x))));
}

inline ProgramPtr p_act(std::string name) {
  auto p = std::make_shared<Program>();
  p->action = std::move(name);
  return p;
}
inline ProgramPtr p_seq(ProgramPtr a, ProgramPtr b) {
  auto p = std::make_shared<Program>();
  p->kind = PKind::Seq;
  p->left = std::move(a);
  p->right = std::move(b);
  return p;
}
inline ProgramPtr p_choice(ProgramPtr a, ProgramPtr b) {
  auto p = std::make_shared<Program>();
  p->kind = PKind::Choice;
  p->left = std::move(a);
  p->right = std::move(b);
  return p;
}
inline ProgramPtr p_test(FormulaPtr x) {
  auto p = std::make_shared<Program>();
  p->kind = PKind::Test;
  p->test = std::move(x);
  return p;
}
inline ProgramPtr p_star(ProgramPtr a) {
  auto p = std::make_shared<Program>();
  p->kind = PKind::Star;
  p->left = std::move(a);
  return p;
}

inline std::string formula_sexpr(const FormulaPtr& f);

inline std::string program_sexpr(const ProgramPtr& p) {
  switch (p->kind) {
    case PKind::Act: return p->action;
    case PKind::Seq: return "(seq " + program_sexpr(p->left) + " " + program_sexpr(p->right) + ")";
    case PKind::Choice:
      return "(choice " + program_sexpr(p->left) + " " + program_sexpr(p->right) + ")";
    case PKind::Test: return "(test " + formula_sexpr(p->test) + ")";
    case PKind::Star: return "(star " + program_sexpr(p->left) + ")";
  }
  return "?";
}

inline std::string formula_sexpr(const FormulaPtr& f) {
  switch (f->kind) {
    case FKind::Atom: return f->atom;
    case FKind::Not: return "(not " + formula_sexpr(f->kids[0]) + ")";
    case FKind::And: {
      std::string s = "(and";
      for (const auto& k : f->kids) s += " " + formula_sexpr(k);
      return s + ")";
    }
    case FKind::Believes:
      return "(believes " + f->agent + " " + formula_sexpr(f->kids[0]) + ")";
    case FKind::Box:
      return "(box " + program_sexpr(f->prog) + " " + formula_sexpr(f->kids[0]) + ")";
  }
  return "?";
}

namespace detail {

struct SexprTokens {
  std::vector<std::string> toks;
  std::size_t pos = 0;

  const std::string& peek() const {
    if (pos >= toks.size()) throw ParseError("unexpected end of input");
    return toks[pos];
  }
  std::string next() {
    if (pos >= toks.size()) throw ParseError("unexpected end of input");
    return toks[pos++];
  }
  void expect(const std::string& s) {
    if (next() != s) throw ParseError("expected " + s);
  }
};

inline SexprTokens lex_sexpr(const std::string& text) {
  SexprTokens out;
  std::string cur;
  for (char ch : text) {
    if (ch == '(' || ch == ')' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) {
        out.toks.push_back(cur);
        cur.clear();
      }
      if (ch == '(' || ch == ')') out.toks.push_back(std::string(1, ch));
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.toks.push_back(cur);
  return out;
}

inline FormulaPtr parse_formula_tokens(SexprTokens& in);

inline ProgramPtr parse_program_tokens(SexprTokens& in) {
  const std::string t = in.next();
  if (t != "(") {
    if (t == ")") throw ParseError("expected a program");
    return p_act(t);
  }
  const std::string head = in.next();
  if (head == "seq" || head == "choice") {
    auto a = parse_program_tokens(in);
    auto b = parse_program_tokens(in);
    in.expect(")");
    return head == "seq" ? p_seq(std::move(a), std::move(b))
                         : p_choice(std::move(a), std::move(b));
  }
  if (head == "test") {
    auto f = parse_formula_tokens(in);
    in.expect(")");
    return p_test(std::move(f));
  }
  if (head == "star") {
    auto a = parse_program_tokens(in);
    in.expect(")");
    return p_star(std::move(a));
  }
  throw ParseError("unknown program form: " + head);
}

inline FormulaPtr parse_formula_tokens(SexprTokens& in) {
  const std::string t = in.next();
  if (t != "(") {
    if (t == ")") throw ParseError("expected a formula");
    return f_atom(t);
  }
  const std::string head = in.next();
  if (head == "not") {
    auto x = parse_formula_tokens(in);
    in.expect(")");
    return f_not(std::move(x));
  }
  if (head == "and" || head == "or") {
    std::vector<FormulaPtr> kids;
    while (in.peek() != ")") kids.push_back(parse_formula_tokens(in));
    in.next();
    return head == "and" ? f_and(std::move(kids)) : f_or(std::move(kids));
  }
  if (head == "implies") {
    auto a = parse_formula_tokens(in);
    auto b = parse_formula_tokens(in);
    in.expect(")");
    return f_implies(std::move(a), std::move(b));
  }
  if (head == "believes") {
    const std::string agent = in.next();
    if (agent == "(" || agent == ")") throw ParseError("expected an agent name");
    auto x = parse_formula_tokens(in);
    in.expect(")");
    return f_believes(agent, std::move(x));
  }
  if (head == "box" || head == "diamond") {
    auto p = parse_program_tokens(in);
    auto x = parse_formula_tokens(in);
    in.expect(")");
    return head == "box" ? f_box(std::move(p), std::move(x))
                         : f_diamond(std::move(p), std::move(x));
  }
  throw ParseError("unknown formula form: " + head);
}

}  // namespace detail

// Reads the textual format formula_sexpr writes; the sugar forms or,
// implies, and diamond are accepted and desugared while parsing.
inline FormulaPtr parse_formula(const std::string& text) {
  auto toks = detail::lex_sexpr(text);
  auto f = detail::parse_formula_tokens(toks);
  if (toks.pos != toks.toks.size()) throw ParseError("trailing input after formula");
  return f;
}

using Relation = std::vector<std::vector<bool>>;

namespace detail {

inline Relation identity_relation(int n) {
  Relation r(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) r[i][i] = true;
  return r;
}

inline Relation compose(const Relation& a, const Relation& b) {
  const int n = static_cast<int>(a.size());
  Relation r(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      if (!a[i][k]) continue;
      for (int j = 0; j < n; ++j) {
        if (b[k][j]) r[i][j] = true;
      }
    }
  }
  return r;
}

inline Relation unite(const Relation& a, const Relation& b) {
  Relation r = a;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (b[i][j]) r[i][j] = true;
    }
  }
  return r;
}

// Reflexive transitive closure as a least fixpoint of R := R or R.R.
inline Relation star_closure(Relation r) {
  r = unite(r, identity_relation(static_cast<int>(r.size())));
  for (;;) {
    Relation next = unite(r, compose(r, r));
    if (next == r) return r;
    r = std::move(next);
  }
}

inline void require_kd45(const std::string& agent, const Relation& r) {
  const int n = static_cast<int>(r.size());
  for (int s = 0; s < n; ++s) {
    if (std::none_of(r[s].begin(), r[s].end(), [](bool x) { return x; })) {
      throw KD45Violation("agent " + agent + ": state " + std::to_string(s) +
                          " considers no state possible (seriality)");
    }
  }
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) {
      if (!r[s][t]) continue;
      for (int u = 0; u < n; ++u) {
        if (r[t][u] && !r[s][u]) {
          throw KD45Violation("agent " + agent + ": transitivity fails at (" +
                              std::to_string(s) + "," + std::to_string(t) + "," +
                              std::to_string(u) + ")");
        }
        if (r[s][u] && !r[t][u]) {
          throw KD45Violation("agent " + agent + ": euclideanness fails at (" +
                              std::to_string(s) + "," + std::to_string(t) + "," +
                              std::to_string(u) + ")");
        }
      }
    }
  }
}

}  // namespace detail

// Finite pointed structure: a valuation per atom, one KD45 belief relation
// per agent, and one transition relation per atomic action.
class KripkeModel {
 public:
  explicit KripkeModel(int states) : n_(states) {
    if (states <= 0) throw CddlError("a model needs at least one state");
  }

  int size() const { return n_; }

  void set_atom(const std::string& name, std::vector<bool> values) {
    check_size(values.size(), "atom " + name);
    atoms_[name] = std::move(values);
  }

  void set_belief(const std::string& agent, Relation r) {
    check_size(r.size(), "belief relation of " + agent);
    for (const auto& row : r) check_size(row.size(), "belief relation of " + agent);
    detail::require_kd45(agent, r);
    beliefs_[agent] = std::move(r);
  }

  void set_action(const std::string& name, Relation r) {
    check_size(r.size(), "action " + name);
    for (const auto& row : r) check_size(row.size(), "action " + name);
    actions_[name] = std::move(r);
  }

  // Valuations are sets of atoms per state: a name the model never mentions
  // is simply false everywhere. Unknown actions likewise denote the empty
  // relation.
  std::vector<bool> atom(const std::string& name) const {
    auto it = atoms_.find(name);
    if (it == atoms_.end()) return std::vector<bool>(n_, false);
    return it->second;
  }
  bool has_atom(const std::string& name) const { return atoms_.count(name) > 0; }
  const Relation& belief(const std::string& agent) const {
    auto it = beliefs_.find(agent);
    if (it == beliefs_.end()) throw CddlError("no belief relation for agent: " + agent);
    return it->second;
  }
  Relation action(const std::string& name) const {
    auto it = actions_.find(name);
    if (it == actions_.end()) return Relation(n_, std::vector<bool>(n_, false));
    return it->second;
  }
  const std::map<std::string, Relation>& actions() const { return actions_; }

 private:
  void check_size(std::size_t got, const std::string& what) const {
    if (got != static_cast<std::size_t>(n_)) {
      throw CddlError(what + " has wrong dimension for a " + std::to_string(n_) +
                      "-state model");
    }
  }

  int n_;
  std::map<std::string, std::vector<bool>> atoms_;
  std::map<std::string, Relation> beliefs_;
  std::map<std::string, Relation> actions_;
};

inline std::vector<bool> sat_states(const KripkeModel& m, const FormulaPtr& f);

inline Relation program_relation(const KripkeModel& m, const ProgramPtr& p) {
  switch (p->kind) {
    case PKind::Act: return m.action(p->action);
    case PKind::Seq: return detail::compose(program_relation(m, p->left), program_relation(m, p->right));
    case PKind::Choice:
      return detail::unite(program_relation(m, p->left), program_relation(m, p->right));
    case PKind::Test: {
      const auto sat = sat_states(m, p->test);
      Relation r(m.size(), std::vector<bool>(m.size(), false));
      for (int i = 0; i < m.size(); ++i) r[i][i] = sat[i];
      return r;
    }
    case PKind::Star: return detail::star_closure(program_relation(m, p->left));
  }
  throw CddlError("unreachable program kind");
}

inline std::vector<bool> sat_states(const KripkeModel& m, const FormulaPtr& f) {
  const int n = m.size();
  switch (f->kind) {
    case FKind::Atom: return m.atom(f->atom);
    case FKind::Not: {
      auto v = sat_states(m, f->kids[0]);
      v.flip();
      return v;
    }
    case FKind::And: {
      std::vector<bool> v(n, true);
      for (const auto& k : f->kids) {
        const auto kv = sat_states(m, k);
        for (int i = 0; i < n; ++i) v[i] = v[i] && kv[i];
      }
      return v;
    }
    case FKind::Believes:
    case FKind::Box: {
      const Relation r = f->kind == FKind::Believes ? m.belief(f->agent)
                                                    : program_relation(m, f->prog);
      const auto kv = sat_states(m, f->kids[0]);
      std::vector<bool> v(n, true);
      for (int s = 0; s < n; ++s) {
        for (int t = 0; t < n; ++t) {
          if (r[s][t] && !kv[t]) {
            v[s] = false;
            break;
          }
        }
      }
      return v;
    }
  }
  throw CddlError("unreachable formula kind");
}

inline bool holds_at(const KripkeModel& m, const FormulaPtr& f, int state) {
  return sat_states(m, f).at(state);
}

inline bool valid_in(const KripkeModel& m, const FormulaPtr& f) {
  const auto v = sat_states(m, f);
  return std::all_of(v.begin(), v.end(), [](bool x) { return x; });
}

// A concrete refutation: the state where the boxed property fails, reached
// from the start state by the listed hops.
struct Counterexample {
  std::vector<int> states;           // path, starting at the start state
  std::vector<std::string> actions;  // one label per hop
  int state = 0;                     // where the property fails
  std::string violated;              // what fails there
};

// Checks f at `start`. For the common shape [p*] inner, a failure is
// explained by a shortest path to the earliest reachable state violating
// `inner` (ties at equal depth broken by smallest state index); each hop is
// labeled with the first atomic action that realizes it. Other shapes
// report the start state itself.
inline std::optional<Counterexample> find_counterexample(const KripkeModel& m,
                                                         const FormulaPtr& f,
                                                         int start = 0) {
  if (f->kind == FKind::Box && f->prog->kind == PKind::Star) {
    const Relation step = program_relation(m, f->prog->left);
    const auto inner = sat_states(m, f->kids[0]);
    std::vector<int> parent(m.size(), -1);
    std::vector<bool> seen(m.size(), false);
    std::vector<int> frontier{start};
    seen[start] = true;
    while (!frontier.empty()) {
      int bad = -1;
      for (int u : frontier) {
        if (!inner[u] && (bad < 0 || u < bad)) bad = u;
      }
      if (bad >= 0) {
        Counterexample cx;
        cx.state = bad;
        cx.violated = formula_sexpr(f->kids[0]);
        for (int v = bad; v != -1; v = parent[v]) cx.states.push_back(v);
        std::reverse(cx.states.begin(), cx.states.end());
        for (std::size_t i = 0; i + 1 < cx.states.size(); ++i) {
          const int a = cx.states[i];
          const int b = cx.states[i + 1];
          std::string label = "test";
          for (const auto& [name, rel] : m.actions()) {
            if (rel[a][b]) {
              label = name;
              break;
            }
          }
          cx.actions.push_back(label);
        }
        return cx;
      }
      std::vector<int> next;
      for (int u : frontier) {
        for (int v = 0; v < m.size(); ++v) {
          if (step[u][v] && !seen[v]) {
            seen[v] = true;
            parent[v] = u;
            next.push_back(v);
          }
        }
      }
      frontier = std::move(next);
    }
    return std::nullopt;
  }
  if (!holds_at(m, f, start)) {
    Counterexample cx;
    cx.states = {start};
    cx.state = start;
    cx.violated = formula_sexpr(f);
    return cx;
  }
  return std::nullopt;
}

// --- run abstraction --------------------------------------------------------

inline std::string trig_atom(const std::string& agent, std::size_t j) {
  return "Trig_" + agent + "_" + std::to_string(j);
}
inline std::string soc_atom(const std::string& agent) { return "SocOnly_" + agent; }
inline std::string top_atom(const std::string& agent, const std::string& hyp) {
  return "Top_" + agent + "_" + hyp;
}
inline std::string acc_atom(const std::string& agent) { return "Acc_" + agent; }
inline std::string upd_action(const std::string& agent, std::size_t j) {
  return "upd_" + agent + "_" + std::to_string(j);
}
inline std::string fb_action(const std::string& agent) { return "fb_" + agent; }

// The contract as a guarded-choice program: try each clause in priority
// order behind the negations of all earlier guards, else fall back.
inline ProgramPtr contract_program(const Contract& c, const std::string& agent) {
  auto guard_chain = [](std::vector<ProgramPtr> parts) {
    ProgramPtr out = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) out = p_seq(out, parts[i]);
    return out;
  };
  std::vector<FormulaPtr> earlier;
  ProgramPtr pi;
  for (std::size_t j = 0; j < c.clauses.size(); ++j) {
    std::vector<ProgramPtr> parts;
    for (const auto& neg : earlier) parts.push_back(p_test(neg));
    const FormulaPtr theta = f_atom(trig_atom(agent, j + 1));
    parts.push_back(p_test(theta));
    parts.push_back(p_act(upd_action(agent, j + 1)));
    const ProgramPtr branch = guard_chain(parts);
    pi = pi ? p_choice(pi, branch) : branch;
    earlier.push_back(f_not(theta));
  }
  std::vector<ProgramPtr> parts;
  for (const auto& neg : earlier) parts.push_back(p_test(neg));
  parts.push_back(p_act(fb_action(agent)));
  const ProgramPtr fallback = guard_chain(parts);
  return pi ? p_choice(pi, fallback) : fallback;
}

// Along every reachable social-only stretch, the leading hypothesis is
// whatever it already was: one more step cannot change it.
inline FormulaPtr social_stability_formula(const Contract& c, const std::string& agent) {
  const ProgramPtr pi = contract_program(c, agent);
  std::vector<FormulaPtr> kept;
  for (const auto& h : c.hypotheses.labels()) {
    kept.push_back(f_implies(f_atom(top_atom(agent, h)), f_box(pi, f_atom(top_atom(agent, h)))));
  }
  return f_box(p_star(pi), f_implies(f_atom(soc_atom(agent)), f_and(std::move(kept))));
}

// Whenever the leading hypothesis changes across a step, the destination
// state shows a fired clause to point at.
inline FormulaPtr accountability_formula(const Contract& c, const std::string& agent) {
  const ProgramPtr pi = contract_program(c, agent);
  std::vector<FormulaPtr> trigs;
  for (std::size_t j = 0; j < c.clauses.size(); ++j) trigs.push_back(f_atom(trig_atom(agent, j + 1)));
  const FormulaPtr any_trig = f_or(std::move(trigs));
  std::vector<FormulaPtr> pairs;
  const auto& hyps = c.hypotheses.labels();
  for (const auto& h : hyps) {
    for (const auto& h2 : hyps) {
      if (h == h2) continue;
      pairs.push_back(f_implies(
          f_atom(top_atom(agent, h)),
          f_box(pi, f_implies(f_atom(top_atom(agent, h2)), any_trig))));
    }
  }
  return f_box(p_star(pi), f_and(std::move(pairs)));
}

// Collapses a logged run into a line of states 0..T: state t is the agent's
// situation after t events. Atoms record what each event offered (trigger
// satisfaction, social-only), what the agent believed (leading hypothesis),
// and whether the next step was certified by a clause. Actions connect t to
// t+1 under the clause (or fallback) the log certifies.
inline KripkeModel abstract_run(const AuditLog& log, const std::vector<Event>& events,
                                const Contract& c, const std::string& agent,
                                const ValidityConfig& cfg) {
  if (log.records.empty() || log.records.front().certificate.label != kInitLabel) {
    throw LogEventMismatch("log must start with the initial-state record");
  }
  if (log.records.size() != events.size() + 1) {
    throw LogEventMismatch("log has " + std::to_string(log.records.size()) +
                           " records for " + std::to_string(events.size()) + " events");
  }
  for (std::size_t t = 0; t < events.size(); ++t) {
    if (log.records[t + 1].event_digest != event_digest(events[t])) {
      throw LogEventMismatch("record " + std::to_string(t + 1) +
                             " does not match the supplied event");
    }
  }
  const int T = static_cast<int>(events.size());
  KripkeModel m(T + 1);

  for (std::size_t j = 0; j < c.clauses.size(); ++j) {
    std::vector<bool> v(T + 1, false);
    for (int t = 0; t < T; ++t) v[t] = eval_trigger(c.clauses[j].trigger, events[t], cfg);
    m.set_atom(trig_atom(agent, j + 1), std::move(v));
  }
  {
    std::vector<bool> v(T + 1, false);
    for (int t = 0; t < T; ++t) v[t] = is_social_only(events[t], cfg);
    m.set_atom(soc_atom(agent), std::move(v));
  }
  const auto& hyps = c.hypotheses.labels();
  for (std::size_t h = 0; h < hyps.size(); ++h) {
    std::vector<bool> v(T + 1, false);
    for (int t = 0; t <= T; ++t) {
      const Belief b(log.records[t].belief_after);
      const auto top = argmax_set(b);
      v[t] = std::find(top.begin(), top.end(), h) != top.end();
    }
    m.set_atom(top_atom(agent, hyps[h]), std::move(v));
  }
  {
    std::vector<bool> v(T + 1, false);
    for (int t = 0; t < T; ++t) {
      v[t] = log.records[t + 1].certificate.label != kFallbackLabel;
    }
    m.set_atom(acc_atom(agent), std::move(v));
  }

  // Edges follow the label the log actually certifies. Runs under certified
  // semantics devolve witnessless firings to FALLBACK before logging, so for
  // them this coincides with the canonical reading; raw or externally built
  // logs may legitimately drive an update action with no usable witness, and
  // the invariants are meant to catch exactly that.
  std::vector<Relation> upd(c.clauses.size(),
                            Relation(T + 1, std::vector<bool>(T + 1, false)));
  Relation fb(T + 1, std::vector<bool>(T + 1, false));
  for (int t = 0; t < T; ++t) {
    const std::string& label = log.records[t + 1].certificate.label;
    if (label == kFallbackLabel) {
      fb[t][t + 1] = true;
      continue;
    }
    bool found = false;
    for (std::size_t j = 0; j < c.clauses.size(); ++j) {
      if (c.clauses[j].trigger.name == label) {
        upd[j][t][t + 1] = true;
        found = true;
        break;
      }
    }
    if (!found) {
      throw LogEventMismatch("record " + std::to_string(t + 1) +
                             " certifies a clause the contract does not have: " + label);
    }
  }
  for (std::size_t j = 0; j < c.clauses.size(); ++j) {
    m.set_action(upd_action(agent, j + 1), std::move(upd[j]));
  }
  m.set_action(fb_action(agent), std::move(fb));

  // The abstraction keeps the agent introspectively certain of its own
  // state: each state is its own belief cluster.
  m.set_belief(agent, detail::identity_relation(T + 1));
  return m;
}

}  // namespace pbrc
