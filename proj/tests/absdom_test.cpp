#include "statelift/absdom.hpp"

#include "exprgen.hpp"

#include <doctest.h>

using namespace statelift;

namespace {

Term sigma() { return mk_cur(0); }
Term cmp(BinOp op, const Term& a, std::uint32_t c) { return mk_bin(op, a, mk_const(c)); }
Term byte_is(char c) { return cmp(BinOp::Eq, sigma(), static_cast<unsigned char>(c)); }

DecisionVector vec(std::initializer_list<std::pair<std::uint32_t, bool>> ds) {
    DecisionVector v;
    for (auto [id, taken] : ds) v.emplace_back(BranchId{id}, taken);
    return v;
}

SkeletalConstraint sk(std::initializer_list<DecisionVector> vs) { return SkeletalConstraint{std::set<DecisionVector>(vs)}; }

bool holds(const Term& f, std::uint32_t byte) {
    Bytes msg(1, static_cast<char>(byte));
    ConcreteFrame cf;
    cf.msg = msg;
    return eval_concrete(f, cf) == Truth::True;
}

}  // namespace

TEST_CASE("realize") {
    BranchMap kappa{{BranchId{1}, byte_is('a')}};
    CHECK(term_equal(realize(vec({{1, true}}), kappa), byte_is('a')));
    CHECK(term_equal(realize(vec({{1, false}}), kappa), mk_not(byte_is('a'))));
    // Complementary literals fold in the term constructors.
    CHECK(is_true(realize(sk({vec({{1, true}}), vec({{1, false}})}), kappa)));
    CHECK(is_false(realize(SkeletalConstraint{}, kappa)));
    CHECK_THROWS_AS(realize(vec({{2, true}}), kappa), UnboundBranchLabel);
}

TEST_CASE("skeletal set algebra") {
    auto a = vec({{0, true}}), b = vec({{0, false}, {1, true}}), c = vec({{0, false}, {1, false}});
    CHECK(sk_union(sk({a}), sk({b})) == sk({a, b}));
    CHECK(sk_intersect(sk({a, b}), sk({b, c})) == sk({b}));
    CHECK(sk_minus(sk({a, b}), sk({b})) == sk({a}));

    SkeletalConstraint f = sk({a, b});
    SkeletalConstraint h = sk({a, b, c});
    auto parts = sr1_partition(h, f);
    CHECK(parts == std::vector<SkeletalConstraint>{sk({c}), f});
    CHECK(sr1_partition(f, f) == std::vector<SkeletalConstraint>{f});
    CHECK(sr1_partition(sk({a}), sk({c})) == std::vector<SkeletalConstraint>{sk({a}), sk({c})});
}

TEST_CASE("simplify") {
    Solver s;
    Term az = mk_and(cmp(BinOp::Ge, sigma(), 'a'), cmp(BinOp::Le, sigma(), 'z'));
    Term f = mk_and(mk_not(byte_is(':')), az);
    CHECK(term_equal(simplify(f, mk_true(), s), az));
    CHECK(is_true(simplify(f, f, s)));
    // ite(c, x, y) == x collapses to true under c.
    Term c = byte_is('q');
    Term x = mk_cur(1), y = mk_const(7);
    CHECK(is_true(simplify(mk_bin(BinOp::Eq, mk_ite(c, x, y), x), c, s)));
    CHECK(term_equal(simplify_value(mk_ite(c, x, y), c, s), x));
    CHECK(term_equal(simplify_value(mk_ite(c, x, y), mk_not(c), s), y));
}

TEST_CASE("intervals and widening") {
    Solver s;
    Term three = mk_or({cmp(BinOp::Eq, sigma(), 0), cmp(BinOp::Eq, sigma(), 3), cmp(BinOp::Eq, sigma(), 1)});
    Term iv = interval_of(sigma(), three, s, "v");
    CHECK(iv->kind == Kind::Interval);
    CHECK(iv->lo == 0);
    CHECK(iv->hi == 3);
    CHECK_FALSE(iv->hi_inf);

    Term older = mk_interval(0, 1, false, false, "v");
    Term newer = mk_interval(0, 3, false, false, "v");
    Term w = widen_interval(older, newer);
    CHECK(w->lo == 0);
    CHECK_FALSE(w->lo_inf);
    CHECK(w->hi_inf);
    CHECK(interval_covers(w, newer));
    CHECK(interval_covers(w, mk_const(1000)));
    CHECK_FALSE(interval_covers(older, mk_const(2)));
    // An unchanged interval stays put.
    CHECK(term_equal(widen_interval(newer, newer), newer));

    Term hull = interval_hull({{mk_const(4), mk_true()}, {sigma(), cmp(BinOp::Lt, sigma(), 2)}}, s, "h");
    CHECK(hull->lo == 0);
    CHECK(hull->hi == 4);
}

TEST_CASE("property: simplify preserves meaning under its context") {
    using namespace exprgen;
    Solver s;
    std::size_t points = 0;
    for (std::uint64_t seed = 0; seed < 120; ++seed) {
        Expr fe = ExprGen(seed, 1, 0).expr(3);
        Expr ce = ExprGen(seed + 5000, 1, 0).expr(2);
        Term f = mk_truth(build(fe)), ctx = mk_truth(build(ce));
        Term g = simplify(f, ctx, s);
        INFO("seed " << seed << " f " << print_term(f) << " ctx " << print_term(ctx) << " g " << print_term(g));
        CHECK(term_size(g) <= term_size(f));
        for (std::uint32_t a = 0; a < 256; ++a) {
            if (oracle(ce, Bytes4{{a, 0}, {}}) == 0) continue;
            ++points;
            bool want = oracle(fe, Bytes4{{a, 0}, {}}) != 0;
            if (holds(g, a) != want) {
                FAIL_CHECK("mismatch at byte " << a);
                break;
            }
        }
    }
    CHECK(points > 5000);
}
