#include "statelift/term.hpp"

#include <algorithm>
#include <unordered_map>

namespace statelift {

// ---------------------------------------------------------------------------
// Affine helpers

Affine affine_add(Affine x, std::uint32_t c) {
    x.b += c;
    return x;
}

std::optional<Affine> affine_add(Affine x, Affine y) {
    if (!x.is_const() && !y.is_const() && x.kid != y.kid) return std::nullopt;
    Affine r;
    r.a = x.a + y.a;
    r.b = x.b + y.b;
    r.kid = r.a == 0 ? 0 : (x.is_const() ? y.kid : x.kid);
    return r;
}

std::optional<Affine> affine_sub(Affine x, Affine y) {
    y.a = 0u - y.a;
    y.b = 0u - y.b;
    return affine_add(x, y);
}

Affine affine_mul(Affine x, std::uint32_t c) {
    Affine r{x.a * c, x.b * c, 0};
    r.kid = r.a == 0 ? 0 : x.kid;
    return r;
}

std::uint32_t affine_at(Affine x, std::uint32_t k) { return x.a * k + x.b; }

Affine affine_subst(Affine x, std::uint32_t kid, Affine r) {
    if (x.is_const() || x.kid != kid) return x;
    Affine out{x.a * r.a, x.a * r.b + x.b, 0};
    out.kid = out.a == 0 ? 0 : r.kid;
    return out;
}

namespace {

std::size_t mix(std::size_t h, std::size_t v) { return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)); }

std::size_t hash_affine(std::size_t h, Affine a) { return mix(mix(mix(h, a.a), a.b), a.kid); }

std::size_t hash_string(std::size_t h, const std::string& s) {
    for (char c : s) h = mix(h, static_cast<unsigned char>(c));
    return mix(h, s.size());
}

std::size_t compute_hash(const Node& n) {
    std::size_t h = static_cast<std::size_t>(n.kind) * 131 + 7;
    h = mix(h, static_cast<std::size_t>(n.op));
    h = mix(h, n.value);
    h = hash_affine(h, n.aff);
    h = mix(mix(h, n.lo), n.hi);
    h = mix(h, (n.lo_inf ? 1u : 0u) | (n.hi_inf ? 2u : 0u));
    h = hash_string(h, n.name);
    for (const auto& k : n.kids) h = mix(h, k->hash);
    for (const auto& s : n.segs) {
        h = mix(h, static_cast<std::size_t>(s.kind));
        h = mix(mix(h, s.lo), s.hi);
        h = hash_affine(hash_affine(h, s.far), s.near);
        h = mix(h, s.byte ? s.byte->hash : 0);
        h = hash_string(h, s.tag);
    }
    return h;
}

Term finish(Node n) {
    n.hash = compute_hash(n);
    return std::make_shared<const Node>(std::move(n));
}

Node node_of(Kind k) {
    Node n;
    n.kind = k;
    return n;
}

template <class T>
int cmp3(const T& a, const T& b) {
    return a < b ? -1 : (b < a ? 1 : 0);
}

int affine_compare(Affine x, Affine y) {
    if (int c = cmp3(x.a, y.a)) return c;
    if (int c = cmp3(x.b, y.b)) return c;
    return cmp3(x.kid, y.kid);
}

int segment_compare(const Segment& x, const Segment& y) {
    if (int c = cmp3(static_cast<int>(x.kind), static_cast<int>(y.kind))) return c;
    if (int c = cmp3(x.lo, y.lo)) return c;
    if (int c = cmp3(x.hi, y.hi)) return c;
    if (int c = affine_compare(x.far, y.far)) return c;
    if (int c = affine_compare(x.near, y.near)) return c;
    if (x.byte || y.byte) {
        if (!x.byte) return -1;
        if (!y.byte) return 1;
        if (int c = term_compare(x.byte, y.byte)) return c;
    }
    return x.tag.compare(y.tag) < 0 ? -1 : (x.tag == y.tag ? 0 : 1);
}

std::optional<Affine> as_affine(const Term& t) {
    if (t->kind == Kind::Const) return Affine::constant(t->value);
    if (t->kind == Kind::Affine) return t->aff;
    return std::nullopt;
}

Segment cur_seg(std::uint32_t lo, std::uint32_t hi) {
    Segment s;
    s.kind = Segment::Kind::Cur;
    s.lo = lo;
    s.hi = hi;
    return s;
}

Segment prev_seg(Affine far, Affine near) {
    Segment s;
    s.kind = Segment::Kind::Prev;
    s.far = far;
    s.near = near;
    return s;
}

Segment byte_seg(const Term& t) {
    if (t->kind == Kind::Cur) return cur_seg(t->value, t->value + 1);
    if (t->kind == Kind::Prev) return prev_seg(t->aff, affine_add(t->aff, 0xffffffffu));
    Segment s;
    s.kind = Segment::Kind::Byte;
    s.byte = t->kind == Kind::Const ? mk_const(t->value & 0xffu) : t;
    return s;
}

BinOp flip_order(BinOp op) {
    switch (op) {
    case BinOp::Lt: return BinOp::Gt;
    case BinOp::Gt: return BinOp::Lt;
    case BinOp::Le: return BinOp::Ge;
    case BinOp::Ge: return BinOp::Le;
    default: return op;
    }
}

BinOp negate_cmp(BinOp op) {
    switch (op) {
    case BinOp::Eq: return BinOp::Ne;
    case BinOp::Ne: return BinOp::Eq;
    case BinOp::Lt: return BinOp::Ge;
    case BinOp::Ge: return BinOp::Lt;
    case BinOp::Gt: return BinOp::Le;
    case BinOp::Le: return BinOp::Gt;
    default: return op;
    }
}

Term raw_bin(BinOp op, const Term& a, const Term& b) {
    Node n = node_of(Kind::Bin);
    n.op = op;
    n.kids = {a, b};
    return finish(std::move(n));
}

constexpr std::uint64_t kMax = 0xffffffffULL;

Range full() { return {0, 0xffffffffu}; }
Range point(std::uint32_t v) { return {v, v}; }
Range boolean() { return {0, 1}; }
Range hull(Range a, Range b) { return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)}; }

Range range_cmp(BinOp op, Range a, Range b) {
    auto def = [](bool t) { return point(t ? 1 : 0); };
    switch (op) {
    case BinOp::Eq:
        if (a.singleton() && b.singleton()) return def(a.lo == b.lo);
        if (a.hi < b.lo || b.hi < a.lo) return point(0);
        return boolean();
    case BinOp::Ne:
        if (a.singleton() && b.singleton()) return def(a.lo != b.lo);
        if (a.hi < b.lo || b.hi < a.lo) return point(1);
        return boolean();
    case BinOp::Lt:
        if (a.hi < b.lo) return point(1);
        if (a.lo >= b.hi) return point(0);
        return boolean();
    case BinOp::Le:
        if (a.hi <= b.lo) return point(1);
        if (a.lo > b.hi) return point(0);
        return boolean();
    case BinOp::Gt:
        if (a.lo > b.hi) return point(1);
        if (a.hi <= b.lo) return point(0);
        return boolean();
    case BinOp::Ge:
        if (a.lo >= b.hi) return point(1);
        if (a.hi < b.lo) return point(0);
        return boolean();
    default: return boolean();
    }
}

Range range_arith(BinOp op, Range a, Range b) {
    if (a.singleton() && b.singleton()) return point(apply_u32(op, a.lo, b.lo));
    switch (op) {
    case BinOp::Add: {
        std::uint64_t lo = std::uint64_t{a.lo} + b.lo;
        std::uint64_t hi = std::uint64_t{a.hi} + b.hi;
        if (hi <= kMax) return {static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(hi)};
        if (lo > kMax) return {static_cast<std::uint32_t>(lo - kMax - 1), static_cast<std::uint32_t>(hi - kMax - 1)};
        return full();
    }
    case BinOp::Sub: {
        std::int64_t lo = std::int64_t{a.lo} - std::int64_t{b.hi};
        std::int64_t hi = std::int64_t{a.hi} - std::int64_t{b.lo};
        if (lo >= 0) return {static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(hi)};
        if (hi < 0)
            return {static_cast<std::uint32_t>(lo + static_cast<std::int64_t>(kMax) + 1),
                    static_cast<std::uint32_t>(hi + static_cast<std::int64_t>(kMax) + 1)};
        return full();
    }
    case BinOp::Mul: {
        std::uint64_t hi = std::uint64_t{a.hi} * b.hi;
        if (hi <= kMax) return {a.lo * b.lo, static_cast<std::uint32_t>(hi)};
        return full();
    }
    case BinOp::Mod:
        if (b.lo > 0) return {0, std::min(a.hi, b.hi - 1)};
        return {0, a.hi};
    case BinOp::Shl:
        if (b.singleton()) {
            std::uint32_t s = b.lo & 31u;
            if ((std::uint64_t{a.hi} << s) <= kMax) return {a.lo << s, a.hi << s};
        }
        return full();
    case BinOp::Shr:
        if (b.hi < 32) return {a.lo >> b.hi, a.hi >> b.lo};
        return {0, a.hi};
    default: return full();
    }
}

bool definitely_true(Range r) { return r.lo > 0; }
bool definitely_false(Range r) { return r.lo == 0 && r.hi == 0; }

Term mk_cmp(BinOp op, Term a, Term b);
Term mk_arith(BinOp op, Term a, Term b);

Term fold_bool_against_const(BinOp op, const Term& a, std::uint32_t k) {
    bool f0 = apply_u32(op, 0, k) != 0;
    bool f1 = apply_u32(op, 1, k) != 0;
    if (f0 && f1) return mk_true();
    if (!f0 && !f1) return mk_false();
    if (f1) return a;
    return mk_not(a);
}

Term mk_cmp(BinOp op, Term a, Term b) {
    if (is_stream(a) || is_stream(b)) throw TypeError("stream value used in comparison");
    std::uint32_t ca = 0;
    std::uint32_t cb = 0;
    bool a_const = is_const(a, &ca);
    bool b_const = is_const(b, &cb);
    if (a_const && b_const) return mk_const(apply_u32(op, ca, cb));
    if (a_const) {
        std::swap(a, b);
        std::swap(ca, cb);
        std::swap(a_const, b_const);
        op = flip_order(op);
    }
    if (b_const) {
        Range r = range_cmp(op, static_range(a), point(cb));
        if (r.singleton()) return mk_const(r.lo);
        if (is_bool(a)) return fold_bool_against_const(op, a, cb);
        if (a->kind == Kind::Ite) {
            std::uint32_t x = 0;
            std::uint32_t y = 0;
            if (is_const(a->kids[1], &x) && is_const(a->kids[2], &y)) {
                bool fx = apply_u32(op, x, cb) != 0;
                bool fy = apply_u32(op, y, cb) != 0;
                if (fx && fy) return mk_true();
                if (!fx && !fy) return mk_false();
                return fx ? a->kids[0] : mk_not(a->kids[0]);
            }
        }
        return raw_bin(op, a, b);
    }
    if (term_equal(a, b)) {
        switch (op) {
        case BinOp::Eq:
        case BinOp::Le:
        case BinOp::Ge: return mk_true();
        default: return mk_false();
        }
    }
    Range r = range_cmp(op, static_range(a), static_range(b));
    if (r.singleton()) return mk_const(r.lo);
    if (term_compare(b, a) < 0) {
        std::swap(a, b);
        op = flip_order(op);
    }
    return raw_bin(op, a, b);
}

Term mk_arith(BinOp op, Term a, Term b) {
    if (is_stream(a) || is_stream(b)) throw TypeError("stream value used in arithmetic");
    std::uint32_t ca = 0;
    std::uint32_t cb = 0;
    bool a_const = is_const(a, &ca);
    bool b_const = is_const(b, &cb);
    if (a_const && b_const) return mk_const(apply_u32(op, ca, cb));

    auto fa = as_affine(a);
    auto fb = as_affine(b);
    if (fa && fb) {
        if (op == BinOp::Add) {
            if (auto r = affine_add(*fa, *fb)) return mk_affine(*r);
        } else if (op == BinOp::Sub) {
            if (auto r = affine_sub(*fa, *fb)) return mk_affine(*r);
        } else if (op == BinOp::Mul) {
            if (b_const) return mk_affine(affine_mul(*fa, cb));
            if (a_const) return mk_affine(affine_mul(*fb, ca));
        }
    }

    if (op == BinOp::Sub && b_const) return mk_arith(BinOp::Add, a, mk_const(0u - cb));
    bool commutative = op == BinOp::Add || op == BinOp::Mul;
    if (commutative && a_const) {
        std::swap(a, b);
        std::swap(ca, cb);
        std::swap(a_const, b_const);
    }
    if (b_const) {
        switch (op) {
        case BinOp::Add:
        case BinOp::Sub:
        case BinOp::Shl:
        case BinOp::Shr:
            if (cb == 0 || ((op == BinOp::Shl || op == BinOp::Shr) && (cb & 31u) == 0)) return a;
            break;
        case BinOp::Mul:
            if (cb == 1) return a;
            if (cb == 0) return mk_const(0);
            break;
        case BinOp::Mod:
            if (cb == 0) return a;
            if (cb == 1) return mk_const(0);
            break;
        default: break;
        }
        if (op == BinOp::Add && a->kind == Kind::Bin && a->op == BinOp::Add) {
            std::uint32_t inner = 0;
            if (is_const(a->kids[1], &inner)) return mk_arith(BinOp::Add, a->kids[0], mk_const(inner + cb));
        }
    }
    // Arithmetic on a constant-branched ite distributes into the branches.
    auto push = [&](const Term& ite, const Term& other, bool ite_left) -> std::optional<Term> {
        std::uint32_t x = 0;
        std::uint32_t y = 0;
        std::uint32_t o = 0;
        if (ite->kind != Kind::Ite || !is_const(other, &o)) return std::nullopt;
        if (!is_const(ite->kids[1], &x) || !is_const(ite->kids[2], &y)) return std::nullopt;
        auto f = [&](std::uint32_t v) { return mk_const(ite_left ? apply_u32(op, v, o) : apply_u32(op, o, v)); };
        return mk_ite(ite->kids[0], f(x), f(y));
    };
    if (auto r = push(a, b, true)) return *r;
    if (auto r = push(b, a, false)) return *r;
    if (commutative && !b_const && term_compare(b, a) < 0) std::swap(a, b);
    return raw_bin(op, a, b);
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction

Term mk_const(std::uint32_t v) {
    static const Term zero = [] {
        Node n = node_of(Kind::Const);
        return finish(std::move(n));
    }();
    static const Term one = [] {
        Node n = node_of(Kind::Const);
        n.value = 1;
        return finish(std::move(n));
    }();
    if (v == 0) return zero;
    if (v == 1) return one;
    Node n = node_of(Kind::Const);
    n.value = v;
    return finish(std::move(n));
}

Term mk_true() { return mk_const(1); }
Term mk_false() { return mk_const(0); }

Term mk_affine(Affine a) {
    if (a.is_const()) return mk_const(a.b);
    Node n = node_of(Kind::Affine);
    n.aff = a;
    return finish(std::move(n));
}

Term mk_kvar(std::uint32_t kid) { return mk_affine(Affine::var(kid)); }

Term mk_cur(std::uint32_t index) {
    Node n = node_of(Kind::Cur);
    n.value = index;
    return finish(std::move(n));
}

Term mk_prev(Affine distance) {
    if (distance.is_const() && distance.b == 0) throw Error("lookback distance must be at least 1");
    Node n = node_of(Kind::Prev);
    n.aff = distance;
    return finish(std::move(n));
}

Term mk_prev(std::uint32_t distance) { return mk_prev(Affine::constant(distance)); }

Term mk_interval(std::uint32_t lo, std::uint32_t hi, bool lo_inf, bool hi_inf, std::string tag) {
    if (lo_inf) lo = 0;
    if (hi_inf) hi = 0xffffffffu;
    if (lo > hi) throw Error("interval with lower bound above upper bound");
    if (lo == hi && !lo_inf && !hi_inf) return mk_const(lo);
    Node n = node_of(Kind::Interval);
    n.lo = lo;
    n.hi = hi;
    n.lo_inf = lo_inf;
    n.hi_inf = hi_inf;
    n.name = std::move(tag);
    return finish(std::move(n));
}

Term mk_full_interval(std::string tag) { return mk_interval(0, 0, true, true, std::move(tag)); }

Term mk_bin(BinOp op, const Term& a, const Term& b) {
    switch (op) {
    case BinOp::And: return mk_and(a, b);
    case BinOp::Or: return mk_or(a, b);
    case BinOp::Append: return mk_append(a, b);
    default: break;
    }
    if (is_comparison(op)) return mk_cmp(op, a, b);
    return mk_arith(op, a, b);
}

namespace {

Term mk_nary(Kind kind, std::vector<Term> xs) {
    const bool is_and = kind == Kind::And;
    std::vector<Term> flat;
    for (auto& x : xs) {
        if (is_stream(x)) throw TypeError("stream value used as a condition");
        Term t = mk_truth(x);
        std::uint32_t v = 0;
        if (is_const(t, &v)) {
            if ((v != 0) != is_and) return mk_const(is_and ? 0 : 1);
            continue;
        }
        if (t->kind == kind) {
            flat.insert(flat.end(), t->kids.begin(), t->kids.end());
        } else {
            flat.push_back(t);
        }
    }
    std::sort(flat.begin(), flat.end(), TermLess{});
    flat.erase(std::unique(flat.begin(), flat.end(), TermEq{}), flat.end());
    if (flat.empty()) return mk_const(is_and ? 1 : 0);
    if (flat.size() == 1) return flat.front();
    if (flat.size() <= 16) {
        for (std::size_t i = 0; i < flat.size(); ++i) {
            Term neg = mk_not(flat[i]);
            if (std::binary_search(flat.begin(), flat.end(), neg, TermLess{})) return mk_const(is_and ? 0 : 1);
        }
    }
    Node n = node_of(kind);
    n.kids = std::move(flat);
    return finish(std::move(n));
}

}  // namespace

Term mk_and(std::vector<Term> xs) { return mk_nary(Kind::And, std::move(xs)); }
Term mk_and(const Term& a, const Term& b) { return mk_and(std::vector<Term>{a, b}); }
Term mk_or(std::vector<Term> xs) { return mk_nary(Kind::Or, std::move(xs)); }
Term mk_or(const Term& a, const Term& b) { return mk_or(std::vector<Term>{a, b}); }

Term mk_not(const Term& t) {
    switch (t->kind) {
    case Kind::Const: return mk_const(t->value == 0 ? 1 : 0);
    case Kind::Bin:
        if (is_comparison(t->op)) {
            // Eq(p, 0) over a predicate is the canonical negated predicate.
            if (t->op == BinOp::Eq && t->kids[0]->kind == Kind::Pred && is_false(t->kids[1])) return t->kids[0];
            return mk_cmp(negate_cmp(t->op), t->kids[0], t->kids[1]);
        }
        break;
    case Kind::And:
    case Kind::Or: {
        std::vector<Term> ks;
        ks.reserve(t->kids.size());
        for (const auto& k : t->kids) ks.push_back(mk_not(k));
        return t->kind == Kind::And ? mk_or(std::move(ks)) : mk_and(std::move(ks));
    }
    case Kind::Pred: return raw_bin(BinOp::Eq, t, mk_false());
    case Kind::Ite:
        if (is_bool(t)) return mk_ite(t->kids[0], mk_not(t->kids[1]), mk_not(t->kids[2]));
        break;
    case Kind::Stream: throw TypeError("stream value used as a condition");
    default: break;
    }
    return mk_cmp(BinOp::Eq, t, mk_false());
}

Term mk_truth(const Term& t) {
    if (is_bool(t)) return t;
    if (is_stream(t)) throw TypeError("stream value used as a condition");
    return mk_cmp(BinOp::Ne, t, mk_false());
}

Term mk_ite(const Term& c0, const Term& a, const Term& b) {
    Term c = mk_truth(c0);
    if (is_stream(a) != is_stream(b)) throw TypeError("ite branches mix stream and integer values");
    std::uint32_t v = 0;
    if (is_const(c, &v)) return v ? a : b;
    if (term_equal(a, b)) return a;
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    if (is_const(a, &x) && is_const(b, &y)) {
        if (x == 1 && y == 0) return c;
        if (x == 0 && y == 1) return mk_not(c);
    }
    if (c->kind == Kind::Bin && c->op == BinOp::Ne) return mk_ite(mk_not(c), b, a);
    if (c->kind == Kind::Bin && c->op == BinOp::Eq && c->kids[0]->kind == Kind::Pred && is_false(c->kids[1]))
        return mk_ite(c->kids[0], b, a);
    Node n = node_of(Kind::Ite);
    n.kids = {c, a, b};
    return finish(std::move(n));
}

Term mk_pred(std::string name, std::vector<Term> args) {
    Node n = node_of(Kind::Pred);
    n.name = std::move(name);
    n.kids = std::move(args);
    return finish(std::move(n));
}

Term mk_stream(std::vector<Segment> segs) {
    std::vector<Segment> out;
    for (auto& s : segs) {
        if (s.kind == Segment::Kind::Cur && s.lo >= s.hi) continue;
        if (s.kind == Segment::Kind::Prev && s.far == s.near) continue;
        if (s.kind == Segment::Kind::Byte && (s.byte->kind == Kind::Cur || s.byte->kind == Kind::Prev))
            s = byte_seg(s.byte);
        if (!out.empty()) {
            Segment& last = out.back();
            if (last.kind == Segment::Kind::Cur && s.kind == Segment::Kind::Cur && last.hi == s.lo) {
                last.hi = s.hi;
                continue;
            }
            if (last.kind == Segment::Kind::Prev && s.kind == Segment::Kind::Prev && last.near == s.far) {
                last.near = s.near;
                continue;
            }
        }
        out.push_back(std::move(s));
    }
    Node n = node_of(Kind::Stream);
    n.segs = std::move(out);
    return finish(std::move(n));
}

Term mk_empty_stream() {
    static const Term empty = mk_stream({});
    return empty;
}

Term mk_top_stream(std::string tag) {
    Segment s;
    s.kind = Segment::Kind::Top;
    s.tag = std::move(tag);
    return mk_stream({s});
}

Term mk_cur_window(std::uint32_t lo, std::uint32_t hi) { return mk_stream({cur_seg(lo, hi)}); }

Term mk_prev_window(Affine far, Affine near) { return mk_stream({prev_seg(far, near)}); }

Term mk_append(const Term& s, const Term& x) {
    if (!is_stream(s)) throw TypeError("'++' needs a stream on the left");
    if (s->kind == Kind::Ite) return mk_ite(s->kids[0], mk_append(s->kids[1], x), mk_append(s->kids[2], x));
    if (x->kind == Kind::Ite && is_stream(x))
        return mk_ite(x->kids[0], mk_append(s, x->kids[1]), mk_append(s, x->kids[2]));
    std::vector<Segment> segs = s->segs;
    if (is_stream(x)) {
        segs.insert(segs.end(), x->segs.begin(), x->segs.end());
    } else {
        segs.push_back(byte_seg(x));
    }
    return mk_stream(std::move(segs));
}

// ---------------------------------------------------------------------------
// Inspection

bool is_stream(const Term& t) {
    if (t->kind == Kind::Stream) return true;
    if (t->kind == Kind::Ite) return is_stream(t->kids[1]);
    return false;
}

bool is_bool(const Term& t) {
    switch (t->kind) {
    case Kind::Const: return t->value <= 1;
    case Kind::Bin: return is_comparison(t->op);
    case Kind::And:
    case Kind::Or:
    case Kind::Pred: return true;
    case Kind::Ite: return is_bool(t->kids[1]) && is_bool(t->kids[2]);
    default: return false;
    }
}

bool is_const(const Term& t, std::uint32_t* v) {
    if (t->kind != Kind::Const) return false;
    if (v) *v = t->value;
    return true;
}

bool is_true(const Term& t) { return t->kind == Kind::Const && t->value != 0; }
bool is_false(const Term& t) { return t->kind == Kind::Const && t->value == 0; }
bool is_empty_stream(const Term& t) { return t->kind == Kind::Stream && t->segs.empty(); }

int term_compare(const Term& a, const Term& b) {
    if (a.get() == b.get()) return 0;
    if (int c = cmp3(static_cast<int>(a->kind), static_cast<int>(b->kind))) return c;
    if (int c = cmp3(static_cast<int>(a->op), static_cast<int>(b->op))) return c;
    if (int c = cmp3(a->value, b->value)) return c;
    if (int c = affine_compare(a->aff, b->aff)) return c;
    if (int c = cmp3(a->lo, b->lo)) return c;
    if (int c = cmp3(a->hi, b->hi)) return c;
    if (int c = cmp3(a->lo_inf, b->lo_inf)) return c;
    if (int c = cmp3(a->hi_inf, b->hi_inf)) return c;
    if (int c = a->name.compare(b->name)) return c < 0 ? -1 : 1;
    if (int c = cmp3(a->kids.size(), b->kids.size())) return c;
    for (std::size_t i = 0; i < a->kids.size(); ++i)
        if (int c = term_compare(a->kids[i], b->kids[i])) return c;
    if (int c = cmp3(a->segs.size(), b->segs.size())) return c;
    for (std::size_t i = 0; i < a->segs.size(); ++i)
        if (int c = segment_compare(a->segs[i], b->segs[i])) return c;
    return 0;
}

bool term_equal(const Term& a, const Term& b) {
    if (a.get() == b.get()) return true;
    if (a->hash != b->hash) return false;
    return term_compare(a, b) == 0;
}

bool structurally_contains(const Term& outer, const Term& inner) {
    if (term_equal(outer, inner)) return true;
    for (const auto& k : outer->kids)
        if (structurally_contains(k, inner)) return true;
    if (outer->kind == Kind::Stream) {
        if (inner->kind == Kind::Stream && !inner->segs.empty() && inner->segs.size() <= outer->segs.size()) {
            for (std::size_t i = 0; i + inner->segs.size() <= outer->segs.size(); ++i) {
                bool all = true;
                for (std::size_t j = 0; j < inner->segs.size() && all; ++j)
                    all = segment_compare(outer->segs[i + j], inner->segs[j]) == 0;
                if (all) return true;
            }
        }
        for (const auto& s : outer->segs)
            if (s.byte && structurally_contains(s.byte, inner)) return true;
    }
    return false;
}

namespace {

void collect_info(const Term& t, TermInfo& info, std::unordered_map<const Node*, bool>& seen) {
    if (!seen.emplace(t.get(), true).second) return;
    auto note_affine = [&](Affine a) {
        if (!a.is_const()) info.kids.insert(a.kid);
    };
    switch (t->kind) {
    case Kind::Affine: note_affine(t->aff); break;
    case Kind::Cur:
        info.has_cur = true;
        info.cur_end = std::max(info.cur_end, t->value + 1);
        break;
    case Kind::Prev:
        info.has_prev = true;
        note_affine(t->aff);
        if (t->aff.is_const()) info.prev_const_max = std::max(info.prev_const_max, t->aff.b);
        break;
    case Kind::Interval: info.has_unknown = true; break;
    case Kind::Pred: info.has_pred = true; break;
    case Kind::Stream:
        for (const auto& s : t->segs) {
            switch (s.kind) {
            case Segment::Kind::Cur:
                info.has_cur = true;
                info.cur_end = std::max(info.cur_end, s.hi);
                break;
            case Segment::Kind::Prev:
                info.has_prev = true;
                note_affine(s.far);
                note_affine(s.near);
                if (s.far.is_const()) info.prev_const_max = std::max(info.prev_const_max, s.far.b);
                break;
            case Segment::Kind::Byte: collect_info(s.byte, info, seen); break;
            case Segment::Kind::Top: info.has_unknown = true; break;
            }
        }
        break;
    default: break;
    }
    for (const auto& k : t->kids) collect_info(k, info, seen);
}

}  // namespace

TermInfo term_info(const Term& t) {
    TermInfo info;
    std::unordered_map<const Node*, bool> seen;
    collect_info(t, info, seen);
    return info;
}

bool mentions_k(const Term& t) { return !term_info(t).kids.empty(); }

Range static_range(const Term& t) {
    switch (t->kind) {
    case Kind::Const: return point(t->value);
    case Kind::Affine: return full();
    case Kind::Cur:
    case Kind::Prev: return {0, 255};
    case Kind::Interval: return {t->lo, t->hi};
    case Kind::Pred:
    case Kind::And:
    case Kind::Or: return boolean();
    case Kind::Ite: return hull(static_range(t->kids[1]), static_range(t->kids[2]));
    case Kind::Bin: {
        Range a = static_range(t->kids[0]);
        Range b = static_range(t->kids[1]);
        if (is_comparison(t->op)) return range_cmp(t->op, a, b);
        return range_arith(t->op, a, b);
    }
    case Kind::Stream: return full();
    }
    return full();
}

std::vector<Term> conjuncts(const Term& t) {
    if (t->kind == Kind::And) return t->kids;
    if (is_true(t)) return {};
    return {t};
}

std::vector<Term> disjuncts(const Term& t) {
    if (t->kind == Kind::Or) return t->kids;
    if (is_false(t)) return {};
    return {t};
}

// ---------------------------------------------------------------------------
// Rebuilding under frame shifts

namespace {

struct ShiftFailed {};

class Rewriter {
public:
    virtual ~Rewriter() = default;

    Term run(const Term& t) {
        auto it = memo_.find(t.get());
        if (it != memo_.end()) return it->second;
        Term r = rebuild(t);
        memo_.emplace(t.get(), r);
        return r;
    }

protected:
    virtual Term on_cur(const Term& t) { return t; }
    virtual Term on_prev(const Term& t) { return t; }
    virtual Term on_affine(const Term& t) { return t; }
    virtual void on_segment(const Segment& s, std::vector<Segment>& out) { out.push_back(s); }

private:
    Term rebuild(const Term& t) {
        switch (t->kind) {
        case Kind::Const:
        case Kind::Interval: return t;
        case Kind::Affine: return on_affine(t);
        case Kind::Cur: return on_cur(t);
        case Kind::Prev: return on_prev(t);
        case Kind::Bin: return mk_bin(t->op, run(t->kids[0]), run(t->kids[1]));
        case Kind::And:
        case Kind::Or: {
            std::vector<Term> ks;
            for (const auto& k : t->kids) ks.push_back(run(k));
            return t->kind == Kind::And ? mk_and(std::move(ks)) : mk_or(std::move(ks));
        }
        case Kind::Ite: return mk_ite(run(t->kids[0]), run(t->kids[1]), run(t->kids[2]));
        case Kind::Pred: {
            std::vector<Term> ks;
            for (const auto& k : t->kids) ks.push_back(run(k));
            return mk_pred(t->name, std::move(ks));
        }
        case Kind::Stream: {
            std::vector<Segment> out;
            for (const auto& s : t->segs) {
                if (s.kind == Segment::Kind::Byte) {
                    Segment c = s;
                    c.byte = run(s.byte);
                    out.push_back(byte_seg(c.byte));
                } else {
                    on_segment(s, out);
                }
            }
            return mk_stream(std::move(out));
        }
        }
        return t;
    }

    std::unordered_map<const Node*, Term> memo_;
};

class Advance : public Rewriter {
public:
    explicit Advance(std::uint32_t w) : w_(w) {}

protected:
    Term on_cur(const Term& t) override {
        if (t->value >= w_) throw Error("current-byte index beyond the iteration width");
        return mk_prev(w_ - t->value);
    }
    Term on_prev(const Term& t) override { return mk_prev(affine_add(t->aff, w_)); }
    void on_segment(const Segment& s, std::vector<Segment>& out) override {
        if (s.kind == Segment::Kind::Cur) {
            if (s.hi > w_) throw Error("current-byte window beyond the iteration width");
            out.push_back(prev_seg(Affine::constant(w_ - s.lo), Affine::constant(w_ - s.hi)));
        } else if (s.kind == Segment::Kind::Prev) {
            out.push_back(prev_seg(affine_add(s.far, w_), affine_add(s.near, w_)));
        } else {
            out.push_back(s);
        }
    }

private:
    std::uint32_t w_;
};

bool small_nonneg(std::uint32_t a) { return a < 0x80000000u; }

class Retreat : public Rewriter {
public:
    explicit Retreat(std::uint32_t w) : w_(w) {}

protected:
    Term on_cur(const Term&) override { throw ShiftFailed{}; }
    Term on_prev(const Term& t) override {
        Affine d = t->aff;
        if (d.is_const()) {
            if (d.b <= w_) return mk_cur(w_ - d.b);
            return mk_prev(d.b - w_);
        }
        if (!small_nonneg(d.a) || d.b <= w_) throw ShiftFailed{};
        return mk_prev(affine_add(d, 0u - w_));
    }
    void on_segment(const Segment& s, std::vector<Segment>& out) override {
        if (s.kind == Segment::Kind::Cur) throw ShiftFailed{};
        if (s.kind != Segment::Kind::Prev) {
            out.push_back(s);
            return;
        }
        if (!s.near.is_const()) throw ShiftFailed{};
        std::uint32_t n = s.near.b;
        if (s.far.is_const()) {
            std::uint32_t f = s.far.b;
            if (f <= w_) {
                out.push_back(cur_seg(w_ - f, w_ - n));
            } else if (n >= w_) {
                out.push_back(prev_seg(Affine::constant(f - w_), Affine::constant(n - w_)));
            } else {
                out.push_back(prev_seg(Affine::constant(f - w_), Affine::constant(0)));
                out.push_back(cur_seg(0, w_ - n));
            }
            return;
        }
        if (!small_nonneg(s.far.a) || s.far.b < w_) throw ShiftFailed{};
        Affine f = affine_add(s.far, 0u - w_);
        if (n >= w_) {
            out.push_back(prev_seg(f, Affine::constant(n - w_)));
        } else {
            out.push_back(prev_seg(f, Affine::constant(0)));
            out.push_back(cur_seg(0, w_ - n));
        }
    }

private:
    std::uint32_t w_;
};

class SubstK : public Rewriter {
public:
    SubstK(std::uint32_t kid, Affine r) : kid_(kid), r_(r) {}

protected:
    Term on_affine(const Term& t) override { return mk_affine(affine_subst(t->aff, kid_, r_)); }
    Term on_prev(const Term& t) override {
        Affine d = affine_subst(t->aff, kid_, r_);
        if (d.is_const() && d.b == 0) throw Error("induction value makes a lookback distance zero");
        return mk_prev(d);
    }
    void on_segment(const Segment& s, std::vector<Segment>& out) override {
        if (s.kind == Segment::Kind::Prev) {
            out.push_back(prev_seg(affine_subst(s.far, kid_, r_), affine_subst(s.near, kid_, r_)));
        } else {
            out.push_back(s);
        }
    }

private:
    std::uint32_t kid_;
    Affine r_;
};

}  // namespace

class Shift : public Rewriter {
public:
    explicit Shift(std::uint32_t j) : j_(j) {}

protected:
    Term on_cur(const Term& t) override { return t->value < j_ ? mk_prev(j_ - t->value) : mk_cur(t->value - j_); }
    Term on_prev(const Term& t) override { return mk_prev(affine_add(t->aff, j_)); }
    void on_segment(const Segment& s, std::vector<Segment>& out) override {
        if (s.kind == Segment::Kind::Cur) {
            if (s.lo < j_) out.push_back(prev_seg(Affine::constant(j_ - s.lo), Affine::constant(j_ - std::min(s.hi, j_))));
            if (s.hi > j_) out.push_back(cur_seg(std::max(s.lo, j_) - j_, s.hi - j_));
        } else if (s.kind == Segment::Kind::Prev) {
            out.push_back(prev_seg(affine_add(s.far, j_), affine_add(s.near, j_)));
        } else {
            out.push_back(s);
        }
    }

private:
    std::uint32_t j_;
};

Term advance_term(const Term& t, std::uint32_t width) {
    if (width == 0) return t;
    Advance a(width);
    return a.run(t);
}

std::optional<Term> retreat_term(const Term& t, std::uint32_t width) {
    if (width == 0) return t;
    try {
        Retreat r(width);
        return r.run(t);
    } catch (const ShiftFailed&) {
        return std::nullopt;
    }
}

Term shift_frame(const Term& t, std::uint32_t offset) {
    if (offset == 0) return t;
    Shift sh(offset);
    return sh.run(t);
}

Term subst_k(const Term& t, std::uint32_t kid, Affine replacement) {
    SubstK s(kid, replacement);
    return s.run(t);
}

Term rename_kid(const Term& t, std::uint32_t from, std::uint32_t to) {
    if (from == to) return t;
    return subst_k(t, from, Affine::var(to));
}

// ---------------------------------------------------------------------------
// Range evaluation

StreamValue eval_stream(const Term& t, Valuation& val) {
    StreamValue out;
    if (t->kind == Kind::Ite) {
        Range c = eval_range(t->kids[0], val);
        if (definitely_true(c)) return eval_stream(t->kids[1], val);
        if (definitely_false(c)) return eval_stream(t->kids[2], val);
        StreamValue a = eval_stream(t->kids[1], val);
        StreamValue b = eval_stream(t->kids[2], val);
        if (a.known && b.known && a.bytes == b.bytes) return a;
        return out;
    }
    if (t->kind != Kind::Stream) return out;
    auto at = [&](Affine x) -> std::optional<std::uint32_t> {
        if (x.is_const()) return x.b;
        auto k = val.kvalue(x.kid);
        if (!k) return std::nullopt;
        return affine_at(x, *k);
    };
    for (const auto& s : t->segs) {
        switch (s.kind) {
        case Segment::Kind::Cur:
            for (std::uint32_t i = s.lo; i < s.hi; ++i) {
                Range r = val.cur(i);
                if (!r.singleton()) return out;
                out.bytes.push_back(static_cast<char>(r.lo & 0xffu));
            }
            break;
        case Segment::Kind::Prev: {
            auto f = at(s.far);
            auto n = at(s.near);
            if (!f || !n || *f < *n) return StreamValue{};
            for (std::uint32_t d = *f; d > *n; --d) {
                Range r = val.prev(d);
                if (!r.singleton()) return StreamValue{};
                out.bytes.push_back(static_cast<char>(r.lo & 0xffu));
            }
            break;
        }
        case Segment::Kind::Byte: {
            Range r = eval_range(s.byte, val);
            if (!r.singleton()) return StreamValue{};
            out.bytes.push_back(static_cast<char>(r.lo & 0xffu));
            break;
        }
        case Segment::Kind::Top: return StreamValue{};
        }
    }
    out.known = true;
    return out;
}

Range eval_range(const Term& t, Valuation& val) {
    switch (t->kind) {
    case Kind::Const: return point(t->value);
    case Kind::Affine: {
        auto k = val.kvalue(t->aff.kid);
        if (!k) return full();
        return point(affine_at(t->aff, *k));
    }
    case Kind::Cur: return val.cur(t->value);
    case Kind::Prev: {
        std::uint32_t d = t->aff.b;
        if (!t->aff.is_const()) {
            auto k = val.kvalue(t->aff.kid);
            if (!k) return {0, 255};
            d = affine_at(t->aff, *k);
        }
        return val.prev(d);
    }
    case Kind::Interval: return val.interval(*t);
    case Kind::Bin: {
        Range a = eval_range(t->kids[0], val);
        Range b = eval_range(t->kids[1], val);
        if (is_comparison(t->op)) return range_cmp(t->op, a, b);
        return range_arith(t->op, a, b);
    }
    case Kind::And: {
        bool unknown = false;
        for (const auto& k : t->kids) {
            Range r = eval_range(k, val);
            if (definitely_false(r)) return point(0);
            if (!definitely_true(r)) unknown = true;
        }
        return unknown ? boolean() : point(1);
    }
    case Kind::Or: {
        bool unknown = false;
        for (const auto& k : t->kids) {
            Range r = eval_range(k, val);
            if (definitely_true(r)) return point(1);
            if (!definitely_false(r)) unknown = true;
        }
        return unknown ? boolean() : point(0);
    }
    case Kind::Ite: {
        Range c = eval_range(t->kids[0], val);
        if (definitely_true(c)) return eval_range(t->kids[1], val);
        if (definitely_false(c)) return eval_range(t->kids[2], val);
        return hull(eval_range(t->kids[1], val), eval_range(t->kids[2], val));
    }
    case Kind::Pred: {
        std::vector<Value> args;
        bool concrete = true;
        for (const auto& a : t->kids) {
            if (is_stream(a)) {
                StreamValue s = eval_stream(a, val);
                if (!s.known) {
                    concrete = false;
                    break;
                }
                args.emplace_back(std::move(s.bytes));
            } else {
                Range r = eval_range(a, val);
                if (!r.singleton()) {
                    concrete = false;
                    break;
                }
                args.emplace_back(r.lo);
            }
        }
        return val.pred(*t, concrete ? &args : nullptr);
    }
    case Kind::Stream: return full();
    }
    return full();
}

}  // namespace statelift
