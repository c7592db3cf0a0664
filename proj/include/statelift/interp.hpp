#pragma once

#include "statelift/absdom.hpp"

namespace statelift {

/// Static facts about one syntactic path through the loop body.
struct VectorInfo {
    DecisionVector path;
    std::uint32_t reads = 0;
    bool exiting = false;
    std::set<std::string> uses;  // read before any assignment on the path
    std::set<std::string> assigned;
};

/// All decision vectors of the body in depth-first order, taken arm first.
std::vector<VectorInfo> enumerate_vectors(const Program& p);

using Env = std::map<std::string, Term>;

/// Runs the init section symbolically.
Env init_env(const Program& p);
/// Moves an iteration's output into the next frame: its `width` bytes
/// become lookback bytes.
Env advance_frame(const Env& env, std::uint32_t width);
Env restrict_env(const Env& env, const std::set<std::string>& vars);
bool env_equal(const Env& a, const Env& b);
std::string print_env(const Env& env, const PrintOptions& opts = {});

struct VectorResult {
    std::size_t vector = 0;  // index into enumerate_vectors
    Term phi;                // path condition over the entry environment
    Env out;
    bool exiting = false;
    std::uint32_t reads = 0;
    BranchMap kappa;  // branch conditions met on the path
    /// Entry variables each output value was computed from.
    std::map<std::string, std::set<std::string>> deps;
    /// Variables redefined from their own entry value, where that value is a
    /// stream or mentions earlier bytes.
    std::set<std::string> recursive;
};

struct IterationResult {
    std::vector<VectorResult> vectors;
    std::size_t pruned = 0;  // branches dropped as infeasible
};

/// One abstract loop iteration from `entry`. Only vectors in `allowed` are
/// followed (all when null); branches unsatisfiable under `ctx` are dropped,
/// undecided ones are kept.
IterationResult abstract_iteration(const Program& p, const std::vector<VectorInfo>& vectors, const Env& entry,
                                   const Term& ctx, const std::set<std::size_t>* allowed, Solver& solver);

/// Variables a group of vectors reads at entry or carries through unchanged.
std::set<std::string> relevant_vars(const Program& p, const std::vector<VectorInfo>& vectors,
                                    const std::set<std::size_t>& group);

}  // namespace statelift
