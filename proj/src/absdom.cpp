#include "statelift/absdom.hpp"

#include <algorithm>
#include <iterator>

namespace statelift {

SkeletalConstraint sk_union(const SkeletalConstraint& a, const SkeletalConstraint& b) {
    SkeletalConstraint r = a;
    r.vectors.insert(b.vectors.begin(), b.vectors.end());
    return r;
}

SkeletalConstraint sk_intersect(const SkeletalConstraint& a, const SkeletalConstraint& b) {
    SkeletalConstraint r;
    std::set_intersection(a.vectors.begin(), a.vectors.end(), b.vectors.begin(), b.vectors.end(),
                          std::inserter(r.vectors, r.vectors.end()));
    return r;
}

SkeletalConstraint sk_minus(const SkeletalConstraint& a, const SkeletalConstraint& b) {
    SkeletalConstraint r;
    std::set_difference(a.vectors.begin(), a.vectors.end(), b.vectors.begin(), b.vectors.end(),
                        std::inserter(r.vectors, r.vectors.end()));
    return r;
}

std::vector<SkeletalConstraint> sr1_partition(const SkeletalConstraint& a, const SkeletalConstraint& b) {
    std::vector<SkeletalConstraint> out;
    for (auto part : {sk_minus(a, b), sk_intersect(a, b), sk_minus(b, a)})
        if (!part.empty()) out.push_back(std::move(part));
    return out;
}

Term realize(const DecisionVector& v, const BranchMap& kappa) {
    std::vector<Term> lits;
    lits.reserve(v.size());
    for (const auto& [id, taken] : v) {
        auto it = kappa.find(id);
        if (it == kappa.end()) throw UnboundBranchLabel("branch label s" + std::to_string(id.value) + " is unbound");
        lits.push_back(taken ? mk_truth(it->second) : mk_not(it->second));
    }
    return mk_and(std::move(lits));
}

Term realize(const SkeletalConstraint& s, const BranchMap& kappa) {
    std::vector<Term> ds;
    ds.reserve(s.vectors.size());
    for (const auto& v : s.vectors) ds.push_back(realize(v, kappa));
    return mk_or(std::move(ds));
}

std::size_t term_size(const Term& t) {
    std::size_t n = 1;
    for (const auto& k : t->kids) n += term_size(k);
    for (const auto& s : t->segs) n += s.byte ? term_size(s.byte) : 1;
    return n;
}

namespace {

bool has_ite(const Term& t) {
    if (t->kind == Kind::Ite) return true;
    for (const auto& k : t->kids)
        if (has_ite(k)) return true;
    for (const auto& s : t->segs)
        if (s.byte && has_ite(s.byte)) return true;
    return false;
}

class Pruner {
public:
    Pruner(Solver& s, bool simplify_conds) : solver_(s), simplify_conds_(simplify_conds) {}

    Term run(const Term& t, const Term& ctx) {
        if (!has_ite(t)) return t;
        switch (t->kind) {
        case Kind::Ite: {
            const Term& c = t->kids[0];
            if (solver_.is_unsat(mk_and(ctx, mk_not(c)))) return run(t->kids[1], ctx);
            if (solver_.is_unsat(mk_and(ctx, c))) return run(t->kids[2], ctx);
            Term cond = simplify_conds_ ? simplify(c, ctx, solver_) : run(c, ctx);
            return mk_ite(cond, run(t->kids[1], mk_and(ctx, c)), run(t->kids[2], mk_and(ctx, mk_not(c))));
        }
        case Kind::Bin: return mk_bin(t->op, run(t->kids[0], ctx), run(t->kids[1], ctx));
        case Kind::And:
        case Kind::Or: {
            std::vector<Term> ks;
            for (const auto& k : t->kids) ks.push_back(run(k, ctx));
            return t->kind == Kind::And ? mk_and(std::move(ks)) : mk_or(std::move(ks));
        }
        case Kind::Pred: {
            std::vector<Term> ks;
            for (const auto& k : t->kids) ks.push_back(run(k, ctx));
            return mk_pred(t->name, std::move(ks));
        }
        case Kind::Stream: {
            Term acc = mk_empty_stream();
            for (const auto& s : t->segs) {
                if (s.byte) {
                    acc = mk_append(acc, run(s.byte, ctx));
                } else {
                    acc = mk_append(acc, mk_stream({s}));
                }
            }
            return acc;
        }
        default: return t;
        }
    }

private:
    Solver& solver_;
    bool simplify_conds_;
};

using Dnf = std::vector<std::vector<Term>>;

std::optional<Dnf> to_dnf(const Term& t, std::size_t cap) {
    switch (t->kind) {
    case Kind::Or: {
        Dnf out;
        for (const auto& k : t->kids) {
            auto d = to_dnf(k, cap);
            if (!d) return std::nullopt;
            out.insert(out.end(), d->begin(), d->end());
            if (out.size() > cap) return std::nullopt;
        }
        return out;
    }
    case Kind::And: {
        Dnf out{{}};
        for (const auto& k : t->kids) {
            auto d = to_dnf(k, cap);
            if (!d) return std::nullopt;
            Dnf next;
            for (const auto& a : out) {
                for (const auto& b : *d) {
                    auto merged = a;
                    merged.insert(merged.end(), b.begin(), b.end());
                    next.push_back(std::move(merged));
                    if (next.size() > cap) return std::nullopt;
                }
            }
            out = std::move(next);
        }
        return out;
    }
    case Kind::Ite:
        if (is_bool(t)) {
            const Term& c = t->kids[0];
            return to_dnf(mk_or(mk_and(c, t->kids[1]), mk_and(mk_not(c), t->kids[2])), cap);
        }
        break;
    default: break;
    }
    if (is_true(t)) return Dnf{{}};
    if (is_false(t)) return Dnf{};
    return Dnf{{t}};
}

}  // namespace

Term simplify_value(const Term& v, const Term& ctx, Solver& solver) {
    if (is_false(ctx)) return v;
    Pruner p(solver, true);
    return p.run(v, ctx);
}

Term simplify(const Term& f, const Term& ctx, Solver& solver, const SimplifyOptions& opts) {
    if (is_const(f)) return f;
    if (!is_bool(f)) return simplify_value(f, ctx, solver);
    if (solver.is_unsat(mk_and(ctx, f))) return mk_false();
    if (solver.is_unsat(mk_and(ctx, mk_not(f)))) return mk_true();

    Pruner p(solver, false);
    Term g = p.run(f, ctx);
    auto dnf = to_dnf(g, opts.max_disjuncts);
    if (!dnf) return g;

    Term not_g = mk_not(g);
    std::vector<std::vector<Term>> kept;
    for (auto d : *dnf) {
        if (solver.is_unsat(mk_and(ctx, mk_and(d)))) continue;
        for (std::size_t i = 0; i < d.size();) {
            std::vector<Term> rest = d;
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
            if (solver.is_unsat(mk_and({ctx, mk_and(rest), not_g}))) {
                d = std::move(rest);
            } else {
                ++i;
            }
        }
        kept.push_back(std::move(d));
    }
    for (std::size_t i = 0; i < kept.size() && kept.size() > 1;) {
        std::vector<Term> others;
        for (std::size_t j = 0; j < kept.size(); ++j)
            if (j != i) others.push_back(mk_and(kept[j]));
        if (solver.is_unsat(mk_and({ctx, mk_and(kept[i]), mk_not(mk_or(others))}))) {
            kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            ++i;
        }
    }
    std::vector<Term> ds;
    for (const auto& d : kept) ds.push_back(mk_and(d));
    Term out = mk_or(std::move(ds));
    if (term_size(out) > term_size(g)) return g;
    return out;
}

Term interval_of(const Term& v, const Term& ctx, Solver& solver, const std::string& tag) {
    return interval_hull({{v, ctx}}, solver, tag);
}

Term interval_hull(const std::vector<std::pair<Term, Term>>& values, Solver& solver, const std::string& tag) {
    bool any = false;
    bool lo_inf = false;
    bool hi_inf = false;
    std::uint32_t lo = 0xffffffffu;
    std::uint32_t hi = 0;
    for (const auto& [v, ctx] : values) {
        if (v->kind == Kind::Interval) {
            any = true;
            lo_inf = lo_inf || v->lo_inf;
            hi_inf = hi_inf || v->hi_inf;
            lo = std::min(lo, v->lo);
            hi = std::max(hi, v->hi);
            continue;
        }
        OptResult mn = solver.minimize(v, ctx);
        if (mn.status == SatStatus::Unsat) continue;
        any = true;
        OptResult mx = solver.maximize(v, ctx);
        if (mn.status == SatStatus::Sat) {
            lo = std::min(lo, mn.value);
        } else {
            lo_inf = true;
        }
        if (mx.status == SatStatus::Sat) {
            hi = std::max(hi, mx.value);
        } else {
            hi_inf = true;
        }
    }
    if (!any) return mk_full_interval(tag);
    if (lo_inf) lo = 0;
    if (hi_inf) hi = 0xffffffffu;
    return mk_interval(lo, hi, lo_inf, hi_inf, tag);
}

Term widen_interval(const Term& older, const Term& newer) {
    auto bounds = [](const Term& t, std::uint32_t& lo, std::uint32_t& hi, bool& li, bool& hi_i) {
        if (t->kind == Kind::Interval) {
            lo = t->lo;
            hi = t->hi;
            li = t->lo_inf;
            hi_i = t->hi_inf;
        } else {
            Range r = static_range(t);
            lo = r.lo;
            hi = r.hi;
            li = hi_i = false;
        }
    };
    std::uint32_t l1, h1, l2, h2;
    bool li1, hi1, li2, hi2;
    bounds(older, l1, h1, li1, hi1);
    bounds(newer, l2, h2, li2, hi2);
    bool lo_inf = li1 || li2 || l2 < l1;
    bool hi_inf = hi1 || hi2 || h2 > h1;
    std::string tag = older->kind == Kind::Interval ? older->name : newer->name;
    return mk_interval(std::min(l1, l2), std::max(h1, h2), lo_inf, hi_inf, tag);
}

bool interval_covers(const Term& outer, const Term& inner) {
    if (outer->kind != Kind::Interval) return term_equal(outer, inner);
    Range r = inner->kind == Kind::Interval ? Range{inner->lo, inner->hi} : static_range(inner);
    return r.lo >= outer->lo && r.hi <= outer->hi;
}

}  // namespace statelift
