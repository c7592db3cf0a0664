#include "statelift/engine.hpp"

#include "data.hpp"
#include "progen.hpp"

#include <doctest.h>

#include <json.hpp>

#include <regex>

using namespace statelift;

namespace {

Term byte_is(std::uint32_t i, char c) { return mk_bin(BinOp::Eq, mk_cur(i), mk_const(static_cast<unsigned char>(c))); }

FsmTransition edge(std::uint32_t from, std::uint32_t to, Term c, std::uint32_t width = 1) {
    FsmTransition t;
    t.from = from;
    t.to = to;
    t.constraint = std::move(c);
    t.width = width;
    return t;
}

Fsm two_states(Term c, std::uint32_t width = 1) {
    Fsm f;
    f.states = {{0, true, false}, {1, false, true}};
    f.transitions.push_back(edge(0, 1, std::move(c), width));
    return f;
}

std::vector<Bytes> words(const std::string& alpha, std::size_t n) {
    std::vector<Bytes> out{Bytes{}}, layer{Bytes{}};
    for (std::size_t len = 1; len <= n; ++len) {
        std::vector<Bytes> next;
        for (const auto& w : layer)
            for (char c : alpha) next.push_back(w + c);
        out.insert(out.end(), next.begin(), next.end());
        layer = std::move(next);
    }
    return out;
}

std::size_t count_edges(const std::string& dot) {
    std::size_t n = 0;
    std::regex edge_re(R"(^\s*q\d+ -> q\d+)");
    std::istringstream in(dot);
    for (std::string line; std::getline(in, line);)
        if (std::regex_search(line, edge_re)) ++n;
    return n;
}

}  // namespace

TEST_CASE("accepts on the abc ground truth") {
    Fsm f = import_json(testdata::read("abc_gt.json"));
    CHECK(accepts(f, "abbc"));
    CHECK(accepts(f, "ac"));
    CHECK_FALSE(accepts(f, ""));
    CHECK_FALSE(accepts(f, "c"));
    CHECK_FALSE(accepts(f, "abbcc"));
    ParseResult pr = parse_message(f, "abbc");
    CHECK(pr.accepted);
    CHECK(pr.path.size() == 4);
    CHECK(pr.ambiguity == 1);
}

TEST_CASE("accepts on the token ground truth") {
    Fsm f = import_json(testdata::read("token_gt.json"));
    PredMap preds;
    preds["iskey"] = [](const std::vector<Value>& a) { return std::get<Bytes>(a.at(0)) == "abcd"; };
    AcceptOptions ao;
    ao.preds = &preds;
    CHECK(accepts(f, "^^^abcd:", ao));
    CHECK(accepts(f, "abcd:", ao));
    CHECK_FALSE(accepts(f, "^^^abc:", ao));
    CHECK_THROWS_AS(accepts(f, "^^^abc:"), MissingPredicateImpl);
    // Counters are bounded by k_max.
    ao.k_max = 2;
    CHECK_FALSE(accepts(f, "^^^abcd:", ao));
}

TEST_CASE("normalize splits disjunctions") {
    Fsm f = two_states(mk_or(byte_is(0, 'a'), byte_is(0, 'b')));
    Fsm n = normalize(f);
    CHECK(n.states.size() == 2);
    REQUIRE(n.transitions.size() == 2);
    for (const auto& t : n.transitions) {
        CHECK(t.from == 0);
        CHECK(t.to == 1);
    }
    Fsm atomic = two_states(byte_is(0, 'a'));
    CHECK(fsm_equal(normalize(atomic), atomic));
}

TEST_CASE("normalize chains disjoint windows") {
    Fsm f = two_states(mk_and(byte_is(0, 'a'), byte_is(1, 'b')), 2);
    Fsm n = normalize(f);
    CHECK(n.states.size() == 3);
    REQUIRE(n.transitions.size() == 2);
    for (const auto& t : n.transitions) CHECK(t.width == 1);
    CHECK(accepts(n, "ab"));
    CHECK_FALSE(accepts(n, "aa"));
    CHECK_FALSE(accepts(n, "a"));
}

TEST_CASE("generate_messages") {
    Fsm f = import_json(testdata::read("abc_gt.json"));
    GenOptions g;
    g.max_len = 3;
    auto ms = generate_messages(f, g);
    std::set<Bytes> got(ms.begin(), ms.end());
    CHECK(ms.size() == 6);
    CHECK(got == std::set<Bytes>{"ac", "bc", "aac", "abc", "bac", "bbc"});
    for (const auto& m : ms) CHECK(accepts(f, m));
    g.max_count = 0;
    CHECK(generate_messages(f, g).empty());
    Fsm dead = two_states(mk_and(byte_is(0, 'a'), byte_is(0, 'b')));
    CHECK(generate_messages(dead, GenOptions{}).empty());
    // A non-zero seed reorders but keeps the same set.
    GenOptions shuffled;
    shuffled.max_len = 3;
    shuffled.seed = 7;
    auto sm = generate_messages(f, shuffled);
    CHECK(std::set<Bytes>(sm.begin(), sm.end()) == got);
}

TEST_CASE("JSON round-trip and DOT") {
    Fsm f = import_json(testdata::read("abc_gt.json"));
    Fsm g = import_json(export_json(f));
    CHECK(fsm_equal(f, g));
    std::string dot = export_dot(f);
    CHECK(count_edges(dot) == 3);
    CHECK(dot.find("doublecircle") != std::string::npos);

    Fsm inferred = infer_fsm(parse_program(testdata::read("token.psl")));
    Fsm back = import_json(export_json(inferred));
    CHECK(fsm_equal(inferred, back));
    CHECK(back.stats.decision_vectors == inferred.stats.decision_vectors);

    Fsm empty;
    empty.states = {{0, true, true}};
    auto j = nlohmann::json::parse(export_json(empty));
    CHECK(j["transitions"].is_array());
    CHECK(j["transitions"].empty());
    CHECK(fsm_equal(import_json(j.dump()), empty));
}

TEST_CASE("import_json rejects malformed documents") {
    CHECK_THROWS_AS(import_json("not json"), JsonSchemaError);
    CHECK_THROWS_AS(import_json("[]"), JsonSchemaError);
    CHECK_THROWS_AS(import_json(R"({"format":"statelift-fsm","version":1,"states":[]})"), JsonSchemaError);
    CHECK_THROWS_AS(import_json(R"({"format":"other","version":1,"states":[],"transitions":[]})"), JsonSchemaError);
    CHECK_THROWS_AS(import_json(R"({"format":"statelift-fsm","version":1,
        "states":[{"id":0,"start":true,"final":true}],
        "transitions":[{"from":0,"to":3,"width":1,"constraint":"s[1,0] == 1"}]})"),
                    JsonSchemaError);
    CHECK_THROWS_AS(import_json(R"({"format":"statelift-fsm","version":1,
        "states":[{"id":0,"start":true,"final":true}],
        "transitions":[{"from":0,"to":0,"width":1,"constraint":"s[1,0] =="}]})"),
                    JsonSchemaError);
}

TEST_CASE("property: normalization preserves language") {
    std::vector<Fsm> fsms{import_json(testdata::read("abc_gt.json")), import_json(testdata::read("token_gt.json")),
                          two_states(mk_and(byte_is(0, 'a'), byte_is(1, 'b')), 2),
                          two_states(mk_or(mk_and(byte_is(0, 'a'), byte_is(1, 'b')), byte_is(1, 'c')), 2)};
    for (std::uint64_t seed = 0; seed < 30; ++seed) fsms.push_back(infer_fsm(parse_program(progen::Generator(seed).program())));
    auto msgs = words("abcd", 5);
    for (std::size_t i = 0; i < fsms.size(); ++i) {
        Fsm n = normalize(fsms[i]);
        std::size_t diff = 0;
        for (const auto& m : msgs)
            if (accepts(fsms[i], m) != accepts(n, m)) ++diff;
        INFO("fsm " << i);
        CHECK(diff == 0);
    }
}
