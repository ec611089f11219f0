#include <CLI11.hpp>

#include <pbrc/adversary.hpp>
#include <pbrc/cddl.hpp>
#include <pbrc/sim.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace pbrc;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kViolated = 2;

ValidityConfig default_validity() {
  ValidityConfig cfg;
  cfg.secret_key = "sim-secret";
  return cfg;
}

ValidityConfig validity_from_json(const json& j) {
  ValidityConfig c;
  c.secret_key = j.value("secret_key", std::string{});
  c.k_required = j.value("k_required", 1);
  if (j.contains("freshness_window") && !j.at("freshness_window").is_null()) {
    c.freshness_window = j.at("freshness_window").get<std::int64_t>();
  }
  c.require_context = j.value("require_context", false);
  if (j.contains("allowed_schemas")) {
    c.allowed_schemas = j.at("allowed_schemas").get<std::set<std::string>>();
  }
  if (j.contains("allowed_query_digests") && !j.at("allowed_query_digests").is_null()) {
    c.allowed_query_digests = j.at("allowed_query_digests").get<std::set<std::string>>();
  }
  return c;
}

ValidityConfig load_validity(const std::string& path) {
  if (path.empty()) return default_validity();
  return validity_from_json(read_json_file(path));
}

std::vector<Event> load_events(const std::string& path) {
  const json j = read_json_file(path);
  if (!j.is_array()) throw std::runtime_error("events file must be a JSON array");
  std::vector<Event> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(event_from_json(x));
  return out;
}

AuditLog load_log(const std::string& path) { return audit_from_jsonl(read_text_file(path)); }

Contract load_contract(const std::string& path) {
  return contract_from_json(read_json_file(path));
}

// Edge list, one "u v" pair per line; pairs are joined in both directions.
Graph load_graph(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::pair<int, int>> edges;
  int max_node = -1;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    int u = 0, v = 0;
    if (!(ls >> u >> v)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw std::runtime_error("bad graph line: " + line);
    }
    if (u < 0 || v < 0) throw std::runtime_error("negative node id in graph file");
    edges.emplace_back(u, v);
    max_node = std::max({max_node, u, v});
  }
  Graph g(max_node + 1);
  for (auto [u, v] : edges) g.add_undirected(u, v);
  return g;
}

std::uint64_t seed_from_env_or(std::uint64_t fallback) {
  const char* env = std::getenv("PBRC_SEED");
  if (!env || *env == '\0') return fallback;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(env, &used);
    if (env[used] != '\0') throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("PBRC_SEED is not an unsigned integer: " + std::string(env));
  }
}

json certificate_json(const Certificate& cert) { return to_json(cert); }

int cmd_simulate(const std::string& sim_id, const std::string& config_path,
                 const std::string& out_dir, bool seed_given, std::uint64_t seed_flag,
                 bool jobs_given, int jobs_flag) {
  SimConfig cfg = default_config(sim_id);
  if (!config_path.empty()) cfg = config_from_json(read_json_file(config_path), cfg);
  cfg.sim_id = sim_id;
  if (seed_given) {
    cfg.seed = seed_flag;
  } else {
    cfg.seed = seed_from_env_or(cfg.seed);
  }
  if (jobs_given) cfg.jobs = jobs_flag;
  validate_config(cfg);

  const SimMetrics m = run_sim(cfg);
  std::filesystem::create_directories(out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  write_text_file(path("metrics.csv"), metrics_csv(m));
  write_text_file(path("trajectories.csv"), trajectories_csv(m));
  write_text_file(path("raw.csv"), raw_csv(m));
  write_text_file(path("manifest.json"), canonical_dump(manifest_json(cfg)) + "\n");
  return kOk;
}

int cmd_audit_verify(const std::string& log_path) {
  const AuditLog log = load_log(log_path);
  const auto bad = verify_audit(log);
  if (!bad) return kOk;
  std::cout << *bad << "\n";
  return kViolated;
}

int cmd_audit_attribute(const std::string& log_path) {
  const AuditLog log = load_log(log_path);
  try {
    const auto flips = attribute_flip(log);
    json arr = json::array();
    for (const auto& f : flips) {
      arr.push_back(json{{"round", f.round},
                         {"record_index", f.record_index},
                         {"certificate", certificate_json(f.certificate)}});
    }
    std::cout << canonical_dump(json{{"flips", arr}}) << "\n";
    return kOk;
  } catch (const AttributionViolation& e) {
    std::cout << canonical_dump(
                     json{{"error", {{"type", "AttributionViolation"}, {"message", e.what()}}}})
              << "\n";
    return kViolated;
  }
}

int cmd_audit_localize(const std::string& log_path, const std::string& events_path,
                       const std::string& contract_path, const std::string& truth,
                       bool delta_given, std::int64_t delta, const std::string& validity_path) {
  const AuditLog log = load_log(log_path);
  const std::vector<Event> events = load_events(events_path);
  const Contract contract = load_contract(contract_path);
  const ValidityConfig vcfg = load_validity(validity_path);
  GroundTruth gt;
  gt.correct_hypothesis = truth;
  if (delta_given) gt.freshness_delta = delta;
  try {
    const auto verdict = localize_failure(log, events, contract, gt, vcfg);
    if (!verdict) {
      std::cout << canonical_dump(json{{"fault", nullptr}}) << "\n";
      return kOk;
    }
    json modes = json::array();
    for (const auto m : verdict->modes) modes.push_back(fault_mode_name(m));
    std::cout << canonical_dump(
                     json{{"fault",
                           {{"first_bad_round", verdict->first_bad_round},
                            {"record_index", verdict->record_index},
                            {"certificate", certificate_json(verdict->certificate)},
                            {"modes", modes}}}})
              << "\n";
    return kViolated;
  } catch (const AttributionViolation& e) {
    std::cout << canonical_dump(
                     json{{"error", {{"type", "AttributionViolation"}, {"message", e.what()}}}})
              << "\n";
    return kViolated;
  }
}

int cmd_flood(const std::string& graph_path, const std::string& placement, int horizon) {
  if (placement != "unique") {
    throw std::runtime_error("only --placement unique is supported");
  }
  const Graph g = load_graph(graph_path);
  const FloodResult fr = flood(g, unique_placement(g), horizon);
  std::cout << "agent,round,token_count\n";
  for (std::size_t t = 0; t < fr.knowledge.size(); ++t) {
    for (int i = 0; i < g.n; ++i) {
      std::cout << i << "," << t << "," << fr.knowledge[t][i].size() << "\n";
    }
  }
  return kOk;
}

int cmd_check(const std::string& log_path, const std::string& events_path,
              const std::string& contract_path, const std::string& formula_spec,
              const std::string& agent_flag, const std::string& validity_path) {
  const AuditLog log = load_log(log_path);
  const std::vector<Event> events = load_events(events_path);
  const Contract contract = load_contract(contract_path);
  const ValidityConfig vcfg = load_validity(validity_path);
  const std::string agent =
      !agent_flag.empty() ? agent_flag
                          : (log.records.empty() ? std::string("agent") : log.records[0].agent);

  FormulaPtr f;
  if (formula_spec == "builtin:social-stability") {
    f = social_stability_formula(contract, agent);
  } else if (formula_spec == "builtin:accountability") {
    f = accountability_formula(contract, agent);
  } else {
    f = parse_formula(read_text_file(formula_spec));
  }

  const KripkeModel m = abstract_run(log, events, contract, agent, vcfg);
  const auto cx = find_counterexample(m, f);
  if (!cx) {
    std::cout << canonical_dump(json{{"holds", true}, {"formula", formula_sexpr(f)}}) << "\n";
    return kOk;
  }
  std::cout << canonical_dump(json{{"holds", false},
                                   {"formula", formula_sexpr(f)},
                                   {"state", cx->state},
                                   {"violated", cx->violated},
                                   {"path", {{"states", cx->states}, {"actions", cx->actions}}}})
            << "\n";
  return kViolated;
}

// The two-round walkthrough: a persuasive but token-free message is absorbed
// only through the damped fallback, then a single validated counter-token
// flips the verdict through the contract clause, and the audit log pins the
// flip to that token.
int cmd_demo() {
  const ValidityConfig vcfg = default_validity();
  Contract c;
  c.name = "running-example";
  c.hypotheses = HypothesisSpace({"True", "False"});
  Trigger phi1;
  phi1.name = "phi1";
  phi1.vars = {"x"};
  phi1.atoms = {atom_valid("x"), atom_contradicts("x", "True")};
  c.clauses.push_back({phi1, op_log_odds("True", -2.0, 10.0)});
  c.fallback = op_dilute(0.1);

  TokenSpec spec;
  spec.id = "tau-star";
  spec.schema = "ToolResult";
  spec.payload_digest = "payload:fact-check";
  spec.issued_at = 1;
  spec.support_labels["True"] = SupportLabel::contradicts;
  const Token tau = mint_token(spec, vcfg.secret_key, {"v0"});

  Belief b({0.6, 0.4});
  RouterConfig rc;
  Xoshiro256ss rng(42);
  AuditLog log = audit_init("agent", b, 0);

  Event e0;
  e0.receiver = "agent";
  e0.round = 0;
  e0.messages.push_back(
      {"colleague", {"agent"}, 0, {}, "everyone I have asked says it is true", 0.97});

  Event e1;
  e1.receiver = "agent";
  e1.round = 1;
  e1.messages.push_back({"verifier", {"agent"}, 1, {tau}, "see attached result", std::nullopt});

  std::printf("claim: \"True\" vs \"False\", prior (%.2f, %.2f)\n", b[0], b[1]);
  for (const Event& e : {e0, e1}) {
    const StepOutcome out = enforced_step(c, rc, b, e, vcfg, rng);
    append_step(log, e.round, "agent", e, vcfg, out);
    std::string witness = "{";
    for (std::size_t i = 0; i < out.certificate.witness.size(); ++i) {
      witness += (i ? ", " : "") + out.certificate.witness[i];
    }
    witness += "}";
    std::printf("round %lld: %zu message(s), %zu token(s) -> certificate (%s, %s), belief (%.8g, %.8g)\n",
                static_cast<long long>(e.round), e.messages.size(), tokens_all(e).size(),
                out.certificate.label.c_str(), witness.c_str(), out.belief[0], out.belief[1]);
    b = out.belief;
  }

  const auto bad = verify_audit(log);
  std::printf("audit chain: %s\n", bad ? "BROKEN" : "intact");
  const auto flips = attribute_flip(log);
  for (const auto& f : flips) {
    std::string witness;
    for (const auto& id : f.certificate.witness) witness += (witness.empty() ? "" : ", ") + id;
    std::printf("verdict flip at round %lld attributed to clause %s, witness [%s]\n",
                static_cast<long long>(f.round), f.certificate.label.c_str(), witness.c_str());
  }
  return bad ? kViolated : kOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"belief-revision contract laboratory"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  auto* sim = app.add_subcommand("simulate", "run a simulation and write CSV outputs");
  std::string sim_id, sim_config, sim_out;
  std::uint64_t sim_seed = 0;
  int sim_jobs = 1;
  sim->add_option("--sim", sim_id, "simulation id (I, Ib, II, III, IV, V, VI)")->required();
  sim->add_option("--config", sim_config, "JSON config overlay");
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--seed", sim_seed, "master seed (overrides PBRC_SEED and config)");
  sim->add_option("--jobs", sim_jobs, "worker threads for trials");

  auto* verify = app.add_subcommand("audit-verify", "check an audit log's hash chain");
  std::string verify_log;
  verify->add_option("log", verify_log, "audit log (JSONL)")->required();

  auto* attribute = app.add_subcommand("audit-attribute", "list certified argmax flips");
  std::string attr_log;
  attribute->add_option("--log", attr_log, "audit log (JSONL)")->required();

  auto* localize = app.add_subcommand("audit-localize", "explain the first wrong turn");
  std::string loc_log, loc_events, loc_contract, loc_truth, loc_validity;
  std::int64_t loc_delta = 0;
  localize->add_option("--log", loc_log, "audit log (JSONL)")->required();
  localize->add_option("--events", loc_events, "event stream (JSON array)")->required();
  localize->add_option("--contract", loc_contract, "contract (JSON)")->required();
  localize->add_option("--truth", loc_truth, "correct hypothesis label")->required();
  auto* delta_opt = localize->add_option("--delta", loc_delta, "freshness window for witnesses");
  localize->add_option("--validity", loc_validity, "validity config (JSON)");

  auto* fl = app.add_subcommand("flood", "token dissemination over a graph");
  std::string fl_graph, fl_placement = "unique";
  int fl_horizon = 0;
  fl->add_option("--graph", fl_graph, "edge list file, one 'u v' per line")->required();
  fl->add_option("--placement", fl_placement, "initial placement (unique)");
  fl->add_option("--horizon", fl_horizon, "rounds to flood")->required();

  auto* check = app.add_subcommand("check", "model-check a logged run");
  std::string ck_log, ck_events, ck_contract, ck_formula, ck_agent, ck_validity;
  check->add_option("--log", ck_log, "audit log (JSONL)")->required();
  check->add_option("--events", ck_events, "event stream (JSON array)")->required();
  check->add_option("--contract", ck_contract, "contract (JSON)")->required();
  check
      ->add_option("--formula", ck_formula,
                   "formula file, builtin:social-stability, or builtin:accountability")
      ->required();
  check->add_option("--agent", ck_agent, "agent name (default: from the log)");
  check->add_option("--validity", ck_validity, "validity config (JSON)");

  auto* demo = app.add_subcommand("demo-running-example", "two-round walkthrough");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_id, sim_config, sim_out, sim->count("--seed") > 0, sim_seed,
                          sim->count("--jobs") > 0, sim_jobs);
    }
    if (verify->parsed()) return cmd_audit_verify(verify_log);
    if (attribute->parsed()) return cmd_audit_attribute(attr_log);
    if (localize->parsed()) {
      return cmd_audit_localize(loc_log, loc_events, loc_contract, loc_truth,
                                delta_opt->count() > 0, loc_delta, loc_validity);
    }
    if (fl->parsed()) return cmd_flood(fl_graph, fl_placement, fl_horizon);
    if (check->parsed()) {
      return cmd_check(ck_log, ck_events, ck_contract, ck_formula, ck_agent, ck_validity);
    }
    if (demo->parsed()) return cmd_demo();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
