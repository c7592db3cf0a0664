#include "statelift/solver.hpp"

#include "exprgen.hpp"

#include <doctest.h>

using namespace statelift;

namespace {

Term sigma() { return mk_cur(0); }
Term byte_is(const Term& b, char c) { return mk_bin(BinOp::Eq, b, mk_const(static_cast<unsigned char>(c))); }
Term cmp(BinOp op, const Term& a, std::uint32_t c) { return mk_bin(op, a, mk_const(c)); }

// Window predicate over the k+1 bytes before the current one.
Term iskey_window(std::uint32_t kid) {
    return mk_pred("iskey", {mk_prev_window(affine_add(Affine::var(kid), 1), Affine::constant(0))});
}

std::uint8_t model_byte(const std::map<std::uint32_t, std::uint8_t>& m, std::uint32_t i) {
    auto it = m.find(i);
    return it == m.end() ? 0 : it->second;
}

}  // namespace

TEST_CASE("sat basics") {
    Solver s;
    CHECK(s.check(mk_and(byte_is(sigma(), 'a'), byte_is(sigma(), 'b'))).unsat());
    SatResult r = s.check(mk_or(byte_is(sigma(), 'a'), byte_is(sigma(), 'b')));
    REQUIRE(r.sat());
    CHECK(r.model.cur.at(0) == 'a');
    CHECK(s.check(mk_true()).sat());
    CHECK(s.check(mk_false()).unsat());
    // Bytes are 8-bit even though arithmetic is 32-bit.
    CHECK(s.check(cmp(BinOp::Gt, sigma(), 255)).unsat());
    CHECK(s.check(cmp(BinOp::Eq, mk_bin(BinOp::Add, sigma(), mk_const(1)), 0)).unsat());
}

TEST_CASE("free predicates and induction variables") {
    Solver s;
    Term f = mk_and(byte_is(sigma(), ':'), iskey_window(5));
    SatResult r = s.check(f);
    REQUIRE(r.sat());
    CHECK(r.model.cur.at(0) == ':');
    // Least model: k = 0 with the predicate on the one-byte window set true.
    CHECK(r.model.k.at(5) == 0);
    CHECK(r.model.preds.size() == 1);
    CHECK(r.model.preds.begin()->second);
    // k = 1 is a model as well.
    QueryFrame qf;
    qf.k[5] = 1;
    CHECK(s.check(f, qf).sat());
    CHECK(s.check(mk_and(iskey_window(5), mk_not(iskey_window(5)))).unsat());
}

TEST_CASE("minimize and maximize") {
    Solver s;
    Term lower = mk_and(cmp(BinOp::Ge, sigma(), 'a'), cmp(BinOp::Le, sigma(), 'z'));
    OptResult lo = s.minimize(sigma(), lower);
    CHECK(lo.status == SatStatus::Sat);
    CHECK(lo.value == 97);
    OptResult hi = s.maximize(sigma(), mk_or({cmp(BinOp::Eq, sigma(), 0), cmp(BinOp::Eq, sigma(), 3),
                                              cmp(BinOp::Eq, sigma(), 1)}));
    CHECK(hi.value == 3);
    OptResult plus = s.minimize(mk_bin(BinOp::Add, sigma(), mk_const(1)), cmp(BinOp::Ge, sigma(), 5));
    CHECK(plus.value == 6);
    CHECK(s.minimize(sigma(), mk_false()).status == SatStatus::Unsat);
}

TEST_CASE("equivalence under a context") {
    Solver s;
    Term ne_colon = mk_not(byte_is(sigma(), ':'));
    Term az = mk_and(cmp(BinOp::Ge, sigma(), 'a'), cmp(BinOp::Le, sigma(), 'z'));
    CHECK(s.equivalent(mk_and(ne_colon, az), az) == std::optional<bool>(true));
    CHECK(s.equivalent(az, mk_true()) == std::optional<bool>(false));
    CHECK(s.equivalent(az, mk_true(), az) == std::optional<bool>(true));
}

TEST_CASE("solve_message") {
    Solver s;
    std::vector<MessageStep> steps(2);
    steps[0].constraint = mk_or(byte_is(sigma(), 'a'), byte_is(sigma(), 'b'));
    steps[0].width = 1;
    steps[1].constraint = byte_is(sigma(), 'c');
    steps[1].width = 1;
    CHECK(s.solve_message(steps) == std::optional<Bytes>("ac"));
    CHECK(s.solve_message({}) == std::optional<Bytes>(""));
    // A lookback into the previous window.
    steps[1].constraint = mk_and(byte_is(sigma(), 'c'), byte_is(mk_prev(1), 'b'));
    CHECK(s.solve_message(steps) == std::optional<Bytes>("bc"));
    steps[1].constraint = mk_and(byte_is(sigma(), 'c'), byte_is(mk_prev(1), 'x'));
    CHECK_FALSE(s.solve_message(steps).has_value());
    // Alphabet restriction.
    steps[1].constraint = cmp(BinOp::Ge, sigma(), 'b');
    CHECK(s.solve_message(steps, 0, "abc") == std::optional<Bytes>("ab"));
}

TEST_CASE("enumerate_models is lexicographic") {
    Solver s;
    QueryFrame qf;
    qf.width = 2;
    qf.alphabet = "abc";
    Term f = mk_or(byte_is(mk_cur(1), 'a'), byte_is(mk_cur(0), 'c'));
    bool complete = false;
    auto ms = s.enumerate_models(f, qf, 100, &complete);
    CHECK(complete);
    CHECK(ms == std::vector<Bytes>{"aa", "ba", "ca", "cb", "cc"});
    auto few = s.enumerate_models(f, qf, 2, &complete);
    CHECK(few.size() == 2);
    CHECK_FALSE(complete);
}

TEST_CASE("eval_concrete") {
    ConcreteFrame cf;
    cf.msg = "xab";
    cf.pos = 1;
    CHECK(eval_concrete(byte_is(sigma(), 'a'), cf) == Truth::True);
    CHECK(eval_concrete(byte_is(mk_prev(1), 'x'), cf) == Truth::True);
    CHECK(eval_concrete(byte_is(mk_prev(2), 'x'), cf) == Truth::OutOfRange);
    CHECK(eval_concrete(byte_is(mk_cur(5), 'x'), cf) == Truth::OutOfRange);
    PredMap preds;
    preds["iskey"] = [](const std::vector<Value>& a) { return std::get<Bytes>(a.at(0)) == "x"; };
    cf.preds = &preds;
    cf.k[5] = 0;
    CHECK(eval_concrete(iskey_window(5), cf) == Truth::True);
    cf.k.clear();
    CHECK(eval_concrete(iskey_window(5), cf) == Truth::OutOfRange);
}

TEST_CASE("property: sat and models agree with brute force over two bytes") {
    using namespace exprgen;
    Solver s;
    int sat = 0, unsat = 0;
    for (std::uint64_t seed = 0; seed < 80; ++seed) {
        Expr e = ExprGen(seed, 2, 0).expr(3);
        Term f = mk_truth(build(e));
        bool any = false;
        for (std::uint32_t a = 0; a < 256 && !any; ++a)
            for (std::uint32_t b = 0; b < 256 && !any; ++b) any = oracle(e, Bytes4{{a, b}, {}}) != 0;
        SatResult r = s.check(f);
        INFO("seed " << seed << " " << print_term(f));
        REQUIRE(r.status != SatStatus::Unknown);
        CHECK(r.sat() == any);
        if (r.sat()) {
            ++sat;
            Bytes4 m{{model_byte(r.model.cur, 0), model_byte(r.model.cur, 1)}, {}};
            CHECK(oracle(e, m) != 0);
        } else {
            ++unsat;
        }
    }
    CHECK(sat > 10);
    CHECK(unsat > 3);
}

TEST_CASE("property: optimization agrees with brute force over one byte") {
    using namespace exprgen;
    Solver s;
    for (std::uint64_t seed = 0; seed < 80; ++seed) {
        Expr obj = ExprGen(seed, 1, 0).expr(3);
        Expr ctx = ExprGen(seed + 1000, 1, 0).expr(2);
        std::optional<std::uint32_t> lo, hi;
        for (std::uint32_t a = 0; a < 256; ++a) {
            if (oracle(ctx, Bytes4{{a, 0}, {}}) == 0) continue;
            std::uint32_t v = oracle(obj, Bytes4{{a, 0}, {}});
            lo = lo ? std::min(*lo, v) : v;
            hi = hi ? std::max(*hi, v) : v;
        }
        Term o = build(obj), c = mk_truth(build(ctx));
        INFO("seed " << seed << " obj " << print_term(o) << " ctx " << print_term(c));
        OptResult mn = s.minimize(o, c);
        OptResult mx = s.maximize(o, c);
        if (!lo) {
            CHECK(mn.status == SatStatus::Unsat);
            continue;
        }
        REQUIRE(mn.status == SatStatus::Sat);
        REQUIRE(mx.status == SatStatus::Sat);
        CHECK(mn.value == *lo);
        CHECK(mx.value == *hi);
    }
}

TEST_CASE("property: models re-evaluate to true with lookbacks") {
    using namespace exprgen;
    Solver s;
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
        Expr e = ExprGen(seed).expr(3);
        Term f = mk_truth(build(e));
        SatResult r = s.check(f);
        INFO("seed " << seed << " " << print_term(f));
        REQUIRE(r.status != SatStatus::Unknown);
        if (!r.sat()) continue;
        Bytes4 m{{model_byte(r.model.cur, 0), model_byte(r.model.cur, 1)},
                 {model_byte(r.model.prev, 1), model_byte(r.model.prev, 2)}};
        CHECK(oracle(e, m) != 0);
        // The same model checked through the concrete evaluator.
        Bytes msg{static_cast<char>(m.prev[1]), static_cast<char>(m.prev[0]), static_cast<char>(m.cur[0]),
                  static_cast<char>(m.cur[1])};
        ConcreteFrame cf;
        cf.msg = msg;
        cf.pos = 2;
        CHECK(eval_concrete(f, cf) == Truth::True);
    }
}
