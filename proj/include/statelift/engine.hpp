#pragma once

#include "statelift/fsm.hpp"
#include "statelift/interp.hpp"

namespace statelift {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct EngineConfig {
    /// Same-state iterations observed before guessing an induction summary.
    std::uint32_t induction_delay = 3;
    std::uint32_t k_max = 16;
    std::uint32_t solver_budget_ms = 5000;
    std::uint64_t solver_node_budget = 4'000'000;
    /// Entry environments a path set may collect before it is widened.
    std::uint32_t widen_after = 4;
    std::uint32_t max_restarts = 400;
    /// Separate vectors that redefine a variable from itself.
    bool split_recursive = true;

    void validate() const;
};

/// One path set of the loop body as seen by the engine.
struct EngineBlock {
    std::set<std::size_t> vectors;
    bool exiting = false;
    std::uint32_t reads = 0;
};

/// Summarizes three consecutive entry environments of one path set as a
/// single environment over induction variable `kid` (k = 0, 1, 2 give the
/// three inputs back). Values must follow affine progressions.
std::optional<Env> guess_induction(const Env& e1, const Env& e2, const Env& e3, std::uint32_t kid);

/// Infers the message FSM of a parsing loop.
Fsm infer_fsm(const Program& p, const EngineConfig& cfg = {});

/// Moves conjuncts that only mention earlier bytes from a state's outgoing
/// transitions onto its incoming ones. Returns the number of states changed.
std::size_t hoist_lookback_conjuncts(Fsm& f, Solver& solver);

/// Removes transitions with unsatisfiable constraints and states that are
/// unreachable from a start or cannot reach a final state.
void prune_fsm(Fsm& f, Solver& solver);

}  // namespace statelift
