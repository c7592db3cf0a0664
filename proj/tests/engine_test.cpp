#include "statelift/engine.hpp"

#include "data.hpp"

#include <doctest.h>

using namespace statelift;

namespace {

Term sigma() { return mk_cur(0); }
Term byte_is(char c) { return mk_bin(BinOp::Eq, sigma(), mk_const(static_cast<unsigned char>(c))); }
Term lower() {
    return mk_and(mk_bin(BinOp::Ge, sigma(), mk_const('a')), mk_bin(BinOp::Le, sigma(), mk_const('z')));
}

bool equiv(Solver& s, const Term& a, const Term& b) { return s.equivalent(a, b) == std::optional<bool>(true); }

PredMap iskey_abcd() {
    PredMap m;
    m["iskey"] = [](const std::vector<Value>& a) { return std::get<Bytes>(a.at(0)) == "abcd"; };
    return m;
}

void check_converged(const Fsm& f) {
    std::size_t n = f.stats.decision_vectors;
    CHECK(n > 0);
    CHECK(f.engine_state_count() <= n);
    CHECK(f.transitions.size() <= n * n);
}

std::vector<std::size_t> self_loops(const Fsm& f, std::uint32_t s) {
    std::vector<std::size_t> out;
    for (auto ti : f.outgoing(s))
        if (f.transitions[ti].to == s) out.push_back(ti);
    return out;
}

}  // namespace

TEST_CASE("config validation") {
    EngineConfig c;
    CHECK_NOTHROW(c.validate());
    c.induction_delay = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.widen_after = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.k_max = 0;
    CHECK_THROWS_AS(infer_fsm(parse_program("do { b = read(); exit(); } while(1)"), c), ConfigError);
}

TEST_CASE("guess_induction") {
    const std::uint32_t kid = 42;
    auto plus = [](std::uint32_t c) { return mk_bin(BinOp::Add, sigma(), mk_const(c)); };
    auto g = guess_induction({{"v", plus(1)}}, {{"v", plus(2)}}, {{"v", plus(3)}}, kid);
    REQUIRE(g.has_value());
    Term want = mk_bin(BinOp::Add, sigma(), mk_affine(affine_add(Affine::var(kid), 1)));
    CHECK(term_equal(g->at("v"), want));

    // Growing lookback windows.
    auto tau = [](std::uint32_t d) { return mk_prev_window(Affine::constant(d), Affine::constant(0)); };
    auto t = guess_induction({{"tok", tau(1)}}, {{"tok", tau(2)}}, {{"tok", tau(3)}}, kid);
    REQUIRE(t.has_value());
    CHECK(term_equal(t->at("tok"), mk_prev_window(affine_add(Affine::var(kid), 1), Affine::constant(0))));

    // A constant sequence needs no counter; a non-affine one has no summary.
    CHECK_FALSE(guess_induction({{"v", mk_const(7)}}, {{"v", mk_const(7)}}, {{"v", mk_const(7)}}, kid));
    CHECK_FALSE(guess_induction({{"v", mk_const(5)}}, {{"v", mk_const(2)}}, {{"v", mk_const(9)}}, kid));
    // Constants alongside a progression are kept.
    auto mixed = guess_induction({{"s", mk_const(0)}, {"v", mk_const(1)}}, {{"s", mk_const(0)}, {"v", mk_const(3)}},
                                 {{"s", mk_const(0)}, {"v", mk_const(5)}}, kid);
    REQUIRE(mixed.has_value());
    CHECK(term_equal(mixed->at("s"), mk_const(0)));
    CHECK(term_equal(subst_k(mixed->at("v"), kid, Affine::constant(4)), mk_const(9)));
}

TEST_CASE("single-branch loop") {
    Program p = parse_program("do { b = read(); if (b == 5) exit(); } while(1)");
    Fsm f = infer_fsm(p);
    Solver s;
    CHECK(f.states.size() == 2);
    CHECK(f.engine_state_count() == 1);
    REQUIRE(f.starts().size() == 1);
    std::uint32_t q = f.starts()[0];
    CHECK_FALSE(f.states[q].final);
    auto loops = self_loops(f, q);
    REQUIRE(loops.size() == 1);
    CHECK(equiv(s, f.transitions[loops[0]].constraint, mk_not(mk_bin(BinOp::Eq, sigma(), mk_const(5)))));
    REQUIRE(f.finals().size() == 1);
    bool to_final = false;
    for (auto ti : f.outgoing(q)) {
        const auto& t = f.transitions[ti];
        if (t.to == f.finals()[0])
            to_final = equiv(s, t.constraint, mk_bin(BinOp::Eq, sigma(), mk_const(5)));
    }
    CHECK(to_final);
    check_converged(f);
    CHECK_FALSE(f.stats.approximate);
}

TEST_CASE("abc compresses to three states") {
    Fsm f = infer_fsm(parse_program(testdata::read("abc.psl")));
    Solver s;
    CHECK(f.states.size() == 3);
    REQUIRE(f.starts().size() == 1);
    REQUIRE(f.finals().size() == 1);
    std::uint32_t start = f.starts()[0], fin = f.finals()[0];
    std::uint32_t mid = 3 - start - fin;
    CHECK(f.transitions.size() == 3);
    auto loops = self_loops(f, mid);
    REQUIRE(loops.size() == 1);
    CHECK(equiv(s, f.transitions[loops[0]].constraint, mk_or(byte_is('a'), byte_is('b'))));
    for (const auto& t : f.transitions) {
        CHECK(t.width == 1);
        if (t.from == start) CHECK(t.to == mid);
        if (t.to == fin) {
            CHECK(t.from == mid);
            CHECK(equiv(s, t.constraint, byte_is('c')));
        }
    }
    CHECK_FALSE(f.stats.widening_used);
    check_converged(f);
}

TEST_CASE("the token buffer is summarized by induction") {
    Fsm f = infer_fsm(parse_program(testdata::read("token.psl")));
    Solver s;
    std::vector<std::uint32_t> ind;
    for (const auto& st : f.states)
        if (st.induction) ind.push_back(st.id);
    REQUIRE(ind.size() == 1);
    std::uint32_t a_k = ind[0];
    auto loops = self_loops(f, a_k);
    REQUIRE(loops.size() == 1);
    CHECK(f.transitions[loops[0]].action == CounterAction::Increment);
    CHECK(equiv(s, f.transitions[loops[0]].constraint, lower()));

    // The reset state loops on '^' and enters the induction state with k = 0.
    bool reset_state = false;
    for (const auto& st : f.states) {
        if (st.induction || st.final) continue;
        auto ls = self_loops(f, st.id);
        if (ls.size() != 1 || !equiv(s, f.transitions[ls[0]].constraint, byte_is('^'))) continue;
        for (auto ti : f.outgoing(st.id))
            if (f.transitions[ti].to == a_k) reset_state = f.transitions[ti].action == CounterAction::Reset;
    }
    CHECK(reset_state);

    // Some transition into a final state pairs ':' with iskey over a window
    // whose length depends on k.
    bool keyed = false;
    for (const auto& t : f.transitions) {
        if (!f.states[t.to].final || !t.k_param()) continue;
        bool colon = false, pred = false;
        for (const auto& c : conjuncts(t.constraint)) {
            colon = colon || equiv(s, c, byte_is(':'));
            pred = pred || (c->kind == Kind::Pred && c->name == "iskey");
        }
        keyed = keyed || (colon && pred);
    }
    CHECK(keyed);

    PredMap preds = iskey_abcd();
    AcceptOptions ao;
    ao.preds = &preds;
    ParseResult pr = parse_message(f, "^^^abcd:", ao);
    REQUIRE(pr.accepted);
    REQUIRE(pr.path.size() == 8);
    // Three '^' steps, four letters through the induction state, then ':'.
    std::vector<std::uint32_t> froms;
    for (auto ti : pr.path) froms.push_back(f.transitions[ti].from);
    CHECK(froms[0] == froms[1]);
    CHECK(froms[1] == froms[2]);
    CHECK(froms[3] == a_k);
    CHECK(froms[4] == a_k);
    CHECK(froms[5] == a_k);
    CHECK(froms[6] == a_k);
    CHECK(f.states[f.transitions[pr.path.back()].to].final);
    CHECK_FALSE(accepts(f, "^^^abce:", ao));
    CHECK_FALSE(f.stats.widening_used);
    check_converged(f);
}

TEST_CASE("without recursion splitting the token must be widened") {
    EngineConfig c;
    c.split_recursive = false;
    Fsm f = infer_fsm(parse_program(testdata::read("token.psl")), c);
    CHECK(f.stats.widening_used);
    for (const auto& st : f.states) CHECK_FALSE(st.induction);
    // Still sound.
    PredMap preds = iskey_abcd();
    AcceptOptions ao;
    ao.preds = &preds;
    CHECK(accepts(f, "^^^abcd:", ao));
}

TEST_CASE("non-affine accumulation is widened") {
    Program p = parse_program("init { x = 0; } do { b = read(); x = x + b; if (x == 200) exit(); } while(1)");
    Fsm f = infer_fsm(p);
    CHECK(f.stats.widening_used);
    CHECK(f.stats.approximate);
    bool interval = false;
    for (const auto& t : f.transitions) {
        TermInfo ti = term_info(t.constraint);
        interval = interval || ti.has_unknown;
    }
    CHECK(interval);
    check_converged(f);
    PredMap none;
    CHECK(accepts(f, Bytes(1, static_cast<char>(200))));
    CHECK(accepts(f, Bytes{static_cast<char>(100), static_cast<char>(100)}));
}

TEST_CASE("prune removes dead states") {
    Fsm f;
    f.states = {{0, true, false}, {1, false, true}, {2, false, false}};
    FsmTransition t;
    t.from = 0;
    t.to = 1;
    t.constraint = byte_is('a');
    t.width = 1;
    f.transitions.push_back(t);
    t.to = 2;
    f.transitions.push_back(t);
    t.from = 0;
    t.to = 1;
    t.constraint = mk_and(byte_is('a'), byte_is('b'));
    f.transitions.push_back(t);
    Solver s;
    prune_fsm(f, s);
    CHECK(f.states.size() == 2);
    CHECK(f.transitions.size() == 1);
}
