#pragma once

#include "statelift/solver.hpp"

namespace statelift {

class UnboundBranchLabel : public Error {
public:
    using Error::Error;
};

/// Path set in canonical DNF: the set of decision vectors it admits.
struct SkeletalConstraint {
    std::set<DecisionVector> vectors;

    bool empty() const { return vectors.empty(); }
    bool contains(const DecisionVector& v) const { return vectors.count(v) != 0; }
    bool operator==(const SkeletalConstraint&) const = default;
    auto operator<=>(const SkeletalConstraint&) const = default;
};

SkeletalConstraint sk_union(const SkeletalConstraint& a, const SkeletalConstraint& b);
SkeletalConstraint sk_intersect(const SkeletalConstraint& a, const SkeletalConstraint& b);
SkeletalConstraint sk_minus(const SkeletalConstraint& a, const SkeletalConstraint& b);

/// Non-empty members of {a - b, a & b, b - a}.
std::vector<SkeletalConstraint> sr1_partition(const SkeletalConstraint& a, const SkeletalConstraint& b);

using BranchMap = std::map<BranchId, Term>;

/// Conjunction of the literals along one decision vector.
Term realize(const DecisionVector& v, const BranchMap& kappa);
/// Disjunction over the vectors of a path set.
Term realize(const SkeletalConstraint& s, const BranchMap& kappa);

struct SimplifyOptions {
    std::size_t max_disjuncts = 32;
};

/// Returns g with ctx => (f == g). Budget exhaustion keeps the input.
Term simplify(const Term& f, const Term& ctx, Solver& solver, const SimplifyOptions& opts = {});
/// Prunes ite arms that ctx rules out and simplifies the remaining conditions.
Term simplify_value(const Term& v, const Term& ctx, Solver& solver);

/// Interval [min, max] of an integer term over the models of ctx.
Term interval_of(const Term& v, const Term& ctx, Solver& solver, const std::string& tag);
/// Hull of several integer terms, each under its own context.
Term interval_hull(const std::vector<std::pair<Term, Term>>& values, Solver& solver, const std::string& tag);
/// Classic interval widening: a bound that moved jumps to infinity.
Term widen_interval(const Term& older, const Term& newer);
/// True when every value of `inner` lies inside interval `outer`.
bool interval_covers(const Term& outer, const Term& inner);

/// Node count, used to keep the smaller of two equivalent forms.
std::size_t term_size(const Term& t);

}  // namespace statelift
