// Misinformation triage under a belief-revision contract.
//
// One analyst agent holds a belief over {real, fake} for a circulating claim.
// Peers apply pressure, an adversary tries forged and stale evidence, and a
// fact-checking tool finally lands a verdict. Every change of mind is gated
// and certified; the audit section at the end shows the paper trail.

#include <pbrc/adversary.hpp>
#include <pbrc/router.hpp>

#include <cstdio>
#include <string>

using namespace pbrc;

namespace {

Contract build_triage_contract() {
  Contract c;
  c.name = "peer-pressure-triage";
  c.hypotheses = HypothesisSpace({"real", "fake"});

  Trigger tool_con;
  tool_con.name = "tool_con";
  tool_con.vars = {"x"};
  tool_con.atoms = {atom_valid("x"), atom_type_is("x", "ToolResult"),
                    atom_contradicts("x", "real")};

  Trigger tool_sup;
  tool_sup.name = "tool_sup";
  tool_sup.vars = {"x"};
  tool_sup.atoms = {atom_valid("x"), atom_type_is("x", "ToolResult"),
                    atom_supports("x", "real")};

  Trigger ret_con;
  ret_con.name = "ret_con";
  ret_con.vars = {"x"};
  ret_con.atoms = {atom_valid("x"), atom_type_is("x", "RetrievedSnippet"),
                   atom_contradicts("x", "real"), atom_fresh("x", 2)};

  // Tool evidence outranks retrieval evidence; contradiction outranks support.
  c.clauses.push_back({tool_con, op_log_odds("real", -2.5, 3.0)});
  c.clauses.push_back({tool_sup, op_log_odds("real", 2.0, 3.0)});
  c.clauses.push_back({ret_con, op_log_odds("real", -1.0, 3.0)});
  c.fallback = op_dilute(0.1);
  return c;
}

Token make_token(const std::string& id, const std::string& schema, SupportLabel label,
                 std::int64_t issued, const std::string& key) {
  TokenSpec spec;
  spec.id = id;
  spec.schema = schema;
  spec.payload_digest = "payload:" + id;
  spec.issued_at = issued;
  spec.support_labels["real"] = label;
  return mint_token(spec, key, {"factcheck-service"});
}

Message social(const std::string& sender, const std::string& text, double claimed) {
  return {sender, {"analyst"}, 0, {}, text, claimed};
}

void print_step(const Event& e, const char* note, const StepOutcome& out) {
  std::string witness;
  for (const auto& id : out.certificate.witness) witness += (witness.empty() ? "" : ", ") + id;
  std::printf("round %lld  %-58s cert (%s, {%s})  b(real)=%.4f conf=%.4f\n",
              static_cast<long long>(e.round), note, out.certificate.label.c_str(),
              witness.c_str(), out.belief[0], conf(out.belief));
}

}  // namespace

int main() {
  const std::string key = "triage-demo-key";
  ValidityConfig vcfg;
  vcfg.secret_key = key;

  const Contract c = build_triage_contract();

  // The contract also ships as demos/triage_contract.json; refuse to run if
  // the file and this builder ever disagree.
  const std::string shipped = std::string(PBRC_SOURCE_DIR) + "/demos/triage_contract.json";
  if (canonical_dump(read_json_file(shipped)) != canonical_dump(to_json(c))) {
    std::fprintf(stderr, "shipped contract file is out of date: %s\n", shipped.c_str());
    return 1;
  }
  const Contract reloaded = contract_from_json(read_json_file(shipped));
  if (to_json(reloaded) != to_json(c)) {
    std::fprintf(stderr, "contract did not survive a serialization round trip\n");
    return 1;
  }

  Belief b({0.55, 0.45});
  RouterConfig rc;
  Xoshiro256ss rng(2026);
  AuditLog log = audit_init("analyst", b, 0);
  std::vector<Event> events;

  const auto step = [&](Event e, const char* note) {
    const StepOutcome out = enforced_step(c, rc, b, e, vcfg, rng);
    append_step(log, e.round, "analyst", e, vcfg, out);
    print_step(e, note, out);
    events.push_back(std::move(e));
    b = out.belief;
  };

  std::printf("claim triage: real vs fake, prior b(real)=%.2f\n", b[0]);

  std::printf("\n-- scenario 1: peer pressure without evidence --\n");
  step({"analyst", 0, {social("peer-1", "everyone on the desk says it is fake", 0.95)}},
       "one peer insists, no tokens");
  step({"analyst", 1,
        {social("peer-1", "still obviously fake", 0.97),
         social("peer-2", "agreed, fake, trust us", 0.99)}},
       "two peers pile on, no tokens");
  step({"analyst", 2, {social("peer-3", "unanimous now, just flip already", 0.99)}},
       "third peer joins, no tokens");

  std::printf("\n-- scenario 2: forged and stale evidence bounce off --\n");
  {
    Token forged = make_token("forged-verdict", "ToolResult", SupportLabel::contradicts, 3, key);
    forged.auth_tag = "0000deadbeef";
    const Token stale =
        make_token("old-snippet", "RetrievedSnippet", SupportLabel::contradicts, 0, key);
    Event e{"analyst", 3, {}};
    e.messages.push_back({"adversary", {"analyst"}, 3, {forged, stale}, "see, proof it is fake",
                          std::nullopt});
    step(std::move(e), "forged tool tag + 3-round-old snippet (window 2)");
  }

  std::printf("\n-- scenario 3: a genuine tool verdict lands --\n");
  {
    const Token verdict =
        make_token("tool-verdict-91", "ToolResult", SupportLabel::contradicts, 4, key);
    const Token snippet =
        make_token("fresh-snippet", "RetrievedSnippet", SupportLabel::contradicts, 4, key);
    Event e{"analyst", 4, {}};
    e.messages.push_back(
        {"factcheck-service", {"analyst"}, 4, {verdict, snippet}, "", std::nullopt});
    step(std::move(e), "valid tool verdict + fresh snippet, both contradict");
  }

  std::printf("\n-- audit --\n");
  const auto bad = verify_audit(log);
  std::printf("hash chain: %s\n", bad ? "BROKEN" : "intact");
  if (bad) return 1;
  for (const auto& f : attribute_flip(log)) {
    std::string witness;
    for (const auto& id : f.certificate.witness) witness += (witness.empty() ? "" : ", ") + id;
    std::printf("flip at round %lld certified by %s, witness {%s}\n",
                static_cast<long long>(f.round), f.certificate.label.c_str(), witness.c_str());
  }
  GroundTruth truth;
  truth.correct_hypothesis = "real";
  if (const auto v = localize_failure(log, events, c, truth, vcfg)) {
    std::printf("if the claim were in fact real, the wrong turn is round %lld:",
                static_cast<long long>(v->first_bad_round));
    for (const auto m : v->modes) std::printf(" %s", fault_mode_name(m));
    std::printf("\n");
  }
  return 0;
}
