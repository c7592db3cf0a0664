#pragma once

// Random u32 expressions over two current bytes and two lookback bytes,
// kept alongside their own evaluator so term construction and the solver can
// be checked against plain arithmetic.

#include "statelift/term.hpp"

#include <random>

namespace exprgen {

using namespace statelift;

struct Expr {
    enum Tag { Lit, Cur, Prev, Bin, Ite } tag = Lit;
    std::uint32_t v = 0;
    BinOp op = BinOp::Add;
    std::vector<Expr> kids;
};

class ExprGen {
public:
    explicit ExprGen(std::uint64_t seed, int curs = 2, int prevs = 2) : rng_(seed), curs_(curs), prevs_(prevs) {}

    Expr expr(int depth) {
        int r = pick(depth > 0 ? 10 : 4);
        Expr e;
        if (r == 0 || r == 1) {
            e.tag = Expr::Lit;
            static const std::uint32_t lits[] = {0, 1, 2, 97, 255, 0xffffffffu};
            e.v = lits[pick(6)];
        } else if (r == 2 || (r == 3 && prevs_ == 0)) {
            e.tag = Expr::Cur;
            e.v = static_cast<std::uint32_t>(pick(curs_));
        } else if (r == 3) {
            e.tag = Expr::Prev;
            e.v = 1 + static_cast<std::uint32_t>(pick(prevs_));
        } else if (r == 9) {
            e.tag = Expr::Ite;
            e.kids = {expr(depth - 1), expr(depth - 1), expr(depth - 1)};
        } else {
            static const BinOp ops[] = {BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Eq,  BinOp::Ne,  BinOp::Lt,
                                        BinOp::Le,  BinOp::Gt,  BinOp::Ge,  BinOp::Mod, BinOp::Shl, BinOp::Shr};
            e.tag = Expr::Bin;
            e.op = ops[pick(12)];
            e.kids = {expr(depth - 1), expr(depth - 1)};
        }
        return e;
    }

private:
    std::mt19937_64 rng_;
    int curs_;
    int prevs_;
    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
};

inline Term build(const Expr& e) {
    switch (e.tag) {
    case Expr::Lit: return mk_const(e.v);
    case Expr::Cur: return mk_cur(e.v);
    case Expr::Prev: return mk_prev(e.v);
    case Expr::Bin: return mk_bin(e.op, build(e.kids[0]), build(e.kids[1]));
    case Expr::Ite: return mk_ite(mk_truth(build(e.kids[0])), build(e.kids[1]), build(e.kids[2]));
    }
    return nullptr;
}

struct Bytes4 {
    std::uint32_t cur[2] = {0, 0};
    std::uint32_t prev[2] = {0, 0};  // distance d at index d - 1
};

inline std::uint32_t oracle(const Expr& e, const Bytes4& b) {
    switch (e.tag) {
    case Expr::Lit: return e.v;
    case Expr::Cur: return b.cur[e.v];
    case Expr::Prev: return b.prev[e.v - 1];
    case Expr::Bin: return apply_u32(e.op, oracle(e.kids[0], b), oracle(e.kids[1], b));
    case Expr::Ite: return oracle(e.kids[0], b) != 0 ? oracle(e.kids[1], b) : oracle(e.kids[2], b);
    }
    return 0;
}

}  // namespace exprgen
