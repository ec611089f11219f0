#include <catch_amalgamated.hpp>

#include <pbrc/evidence.hpp>
#include <pbrc/rng.hpp>

#include "testutil.hpp"

using namespace pbrc;
using testutil::basic_config;
using testutil::make_token;
using testutil::one_message_event;

TEST_CASE("minted token validates under its secret", "[evidence]") {
  ValidityConfig cfg = basic_config();
  Token t = make_token("t1", cfg, {});
  CHECK(is_valid(t, cfg, 0));
  CHECK(verified_attestor_count(t, cfg) == 1);
  CHECK(t.auth_tag == t.attestations.front().tag);
}

TEST_CASE("tag forgery and tampering are detected", "[evidence]") {
  ValidityConfig cfg = basic_config();

  SECTION("wrong secret") {
    testutil::TokenOpts opts;
    opts.valid = false;
    CHECK_FALSE(is_valid(make_token("t1", cfg, opts), cfg, 0));
  }

  SECTION("bit-flipped tag") {
    Token t = make_token("t1", cfg, {});
    t.auth_tag[0] = t.auth_tag[0] == 'a' ? 'b' : 'a';
    CHECK_FALSE(is_valid(t, cfg, 0));
  }

  SECTION("every content field is covered by the tag") {
    auto tampered = [&](auto&& mutate) {
      Token t = make_token("t1", cfg, {.labels = {{"True", SupportLabel::supports}}});
      mutate(t);
      return is_valid(t, cfg, 0);
    };
    CHECK_FALSE(tampered([](Token& t) { t.id = "other"; }));
    CHECK_FALSE(tampered([](Token& t) { t.schema = "VerifierJudgment"; }));
    CHECK_FALSE(tampered([](Token& t) { t.payload_digest = sha256_hex("else"); }));
    CHECK_FALSE(tampered([](Token& t) { t.issued_at += 1; }));
    CHECK_FALSE(tampered([](Token& t) { t.context_binding = "ctx"; }));
    CHECK_FALSE(tampered([](Token& t) { t.query_digest = "q"; }));
    CHECK_FALSE(tampered([](Token& t) { t.support_labels["True"] = SupportLabel::contradicts; }));
  }

  SECTION("random tags never validate") {
    Token t = make_token("t1", cfg, {});
    Xoshiro256ss rng(123);
    int accepted = 0;
    for (int i = 0; i < 2000; ++i) {
      Token forged = t;
      std::string tag;
      for (int c = 0; c < 64; ++c) tag.push_back("0123456789abcdef"[rng.uniform_int(16)]);
      forged.auth_tag = tag;
      forged.attestations[0].tag = tag;
      if (is_valid(forged, cfg, 0)) ++accepted;
    }
    CHECK(accepted == 0);
  }
}

TEST_CASE("attestation quorum", "[evidence]") {
  ValidityConfig cfg = basic_config();
  cfg.k_required = 3;

  testutil::TokenOpts two, three;
  two.validators = {"v0", "v1"};
  three.validators = {"v0", "v1", "v2"};
  CHECK_FALSE(is_valid(make_token("t1", cfg, two), cfg, 0));
  CHECK(is_valid(make_token("t2", cfg, three), cfg, 0));

  SECTION("duplicate validators count once") {
    testutil::TokenOpts dup;
    dup.validators = {"v0", "v0", "v0"};
    Token t = make_token("t3", cfg, dup);
    CHECK(verified_attestor_count(t, cfg) == 1);
    CHECK_FALSE(is_valid(t, cfg, 0));
  }

  SECTION("a bad attestation does not count toward the quorum") {
    Token t = make_token("t4", cfg, three);
    t.attestations[2].tag[0] = t.attestations[2].tag[0] == 'f' ? 'e' : 'f';
    CHECK(verified_attestor_count(t, cfg) == 2);
    CHECK_FALSE(is_valid(t, cfg, 0));
  }

  SECTION("validator keys differ per validator") {
    CHECK(validator_key("s", "v0") != validator_key("s", "v1"));
    CHECK(validator_key("s", "v0") != validator_key("other", "v0"));
  }
}

TEST_CASE("schema, context and query policies", "[evidence]") {
  ValidityConfig cfg = basic_config();

  SECTION("schema allowlist") {
    cfg.allowed_schemas = {"ToolResult"};
    CHECK(is_valid(make_token("t", cfg, {.schema = "ToolResult"}), cfg, 0));
    CHECK_FALSE(is_valid(make_token("u", cfg, {.schema = "RetrievedSnippet"}), cfg, 0));
  }

  SECTION("unknown schema never validates") {
    Token t = make_token("t", cfg, {});
    t.schema = "Gossip";
    CHECK_FALSE(is_valid(t, cfg, 0));
  }

  SECTION("context requirement") {
    cfg.require_context = true;
    CHECK_FALSE(is_valid(make_token("t", cfg, {}), cfg, 0));
    CHECK(is_valid(make_token("u", cfg, {.context = "run-42"}), cfg, 0));
  }

  SECTION("query allowlist") {
    cfg.allowed_query_digests = {{sha256_hex("who won")}};
    CHECK(is_valid(make_token("t", cfg, {.query = sha256_hex("who won")}), cfg, 0));
    CHECK_FALSE(is_valid(make_token("u", cfg, {.query = sha256_hex("steered query")}), cfg, 0));
    CHECK_FALSE(is_valid(make_token("v", cfg, {}), cfg, 0));
  }
}

TEST_CASE("freshness is separate from validity", "[evidence]") {
  ValidityConfig cfg = basic_config();
  Token t = make_token("t", cfg, {.issued_at = 10});

  // Replayed verbatim much later: still valid, no longer fresh.
  CHECK(is_valid(t, cfg, 500));
  CHECK(is_fresh(t, 15, 9));
  CHECK_FALSE(is_fresh(t, 20, 9));
  CHECK(is_fresh(t, 20, std::nullopt));
  // A token from the future is trivially fresh.
  CHECK(is_fresh(t, 5, 9));
}

TEST_CASE("event token collection and social-only detection", "[evidence]") {
  ValidityConfig cfg = basic_config();
  Token a = make_token("a", cfg, {});
  Token b = make_token("b", cfg, {});
  Token junk = make_token("junk", cfg, {.valid = false});

  Event e;
  e.receiver = "me";
  e.round = 3;
  e.messages.push_back({"p1", {"me"}, 3, {b, junk}, "believe me", 0.99});
  e.messages.push_back({"p2", {"me"}, 3, {a, b}, "", std::nullopt});

  auto all = tokens_all(e);
  REQUIRE(all.size() == 3);
  // First-occurrence order, duplicates dropped.
  CHECK(all[0].id == "b");
  CHECK(all[1].id == "junk");
  CHECK(all[2].id == "a");

  auto valid = tokens_valid(e, cfg);
  REQUIRE(valid.size() == 2);
  CHECK_FALSE(is_social_only(e, cfg));

  SECTION("rhetoric-only event is social-only") {
    Event social = one_message_event({}, 0, "peer", "everyone already agrees");
    CHECK(is_social_only(social, cfg));
  }

  SECTION("junk tokens do not rescue an event from social-only") {
    Event junky = one_message_event({junk}, 0);
    CHECK(is_social_only(junky, cfg));
    CHECK(tokens_all(junky).size() == 1);
  }
}

TEST_CASE("universes expose validity, senders and social-only status", "[evidence]") {
  ValidityConfig cfg = basic_config();
  Token a = make_token("a", cfg, {});
  Token z = make_token("z", cfg, {.valid = false});
  Event e;
  e.receiver = "me";
  e.round = 7;
  e.messages.push_back({"alice", {"me"}, 7, {z}, "", std::nullopt});
  e.messages.push_back({"bob", {"me"}, 7, {a, z}, "", std::nullopt});

  TokenUniverse u = make_universe(e, cfg);
  REQUIRE(u.tokens.size() == 2);
  CHECK(u.tokens[0].id == "a");  // id-sorted
  CHECK(u.tokens[1].id == "z");
  CHECK(u.valid_ids == std::set<std::string>{"a"});
  CHECK(u.now == 7);
  CHECK_FALSE(u.social_only);
  CHECK(u.senders_by_token.at("z") == std::set<std::string>{"alice", "bob"});
  CHECK(u.senders_by_token.at("a") == std::set<std::string>{"bob"});

  TokenUniverse r = restricted_universe(e, {z}, cfg);
  CHECK(r.tokens.size() == 1);
  CHECK(r.valid_ids.empty());
  // Event-level fact: the event as a whole is not social-only.
  CHECK_FALSE(r.social_only);
}

TEST_CASE("token and event JSON round trips", "[evidence]") {
  ValidityConfig cfg = basic_config();
  testutil::TokenOpts opts;
  opts.labels = {{"True", SupportLabel::supports}, {"False", SupportLabel::contradicts}};
  opts.context = "thread-9";
  opts.query = sha256_hex("q");
  opts.validators = {"v0", "v1"};
  Token t = make_token("t", cfg, opts);

  Token back = token_from_json(to_json(t));
  CHECK(back == t);
  CHECK(token_digest(back) == token_digest(t));
  CHECK(is_valid(back, cfg, 0));

  Event e = one_message_event({t}, 2, "peer", "look at the data");
  e.messages[0].confidence_claim = 0.7;
  Event eback = event_from_json(to_json(e));
  CHECK(eback == e);
  CHECK(event_digest(eback) == event_digest(e));

  Event reworded = e;
  reworded.messages[0].rhetoric = "LOOK AT THE DATA";
  CHECK(event_digest(reworded) != event_digest(e));

  CHECK_THROWS(support_label_from("definitely"));
}

TEST_CASE("canonical serialization is stable under reparse", "[evidence]") {
  ValidityConfig cfg = basic_config();
  Token t = make_token("t", cfg, {.labels = {{"True", SupportLabel::supports}}});
  Event e = one_message_event({t}, 1);
  const std::string once = canonical_dump(to_json(e));
  const std::string twice = canonical_dump(json::parse(once));
  CHECK(once == twice);
}
