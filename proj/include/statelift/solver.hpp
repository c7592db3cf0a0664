#pragma once

#include "statelift/term.hpp"

#include <chrono>
#include <map>
#include <unordered_map>

namespace statelift {

struct SolverConfig {
    std::uint32_t k_max = 16;
    std::uint64_t node_budget = 4'000'000;
    std::uint32_t budget_ms = 5000;
    /// Implementations used for predicate applications with concrete
    /// arguments. Predicates without one are free booleans per ground key.
    const PredMap* preds = nullptr;
};

enum class SatStatus { Sat, Unsat, Unknown };

struct Model {
    std::map<std::uint32_t, std::uint8_t> cur;   // current-iteration byte index -> value
    std::map<std::uint32_t, std::uint8_t> prev;  // lookback distance -> value
    std::map<std::uint32_t, std::uint32_t> k;    // induction variable id -> count
    std::map<std::string, std::uint32_t> intervals;
    std::map<std::string, bool> preds;  // ground application -> truth
};

struct SatResult {
    SatStatus status = SatStatus::Unknown;
    Model model;
    std::string reason;

    bool sat() const { return status == SatStatus::Sat; }
    bool unsat() const { return status == SatStatus::Unsat; }
};

struct OptResult {
    SatStatus status = SatStatus::Unknown;
    std::uint32_t value = 0;
};

/// One window of a message to synthesize: `width` fresh bytes satisfying
/// `constraint`, with every byte before the window fixed.
struct MessageStep {
    Term constraint;
    std::uint32_t width = 0;
    std::map<std::uint32_t, std::uint32_t> k;
};

/// Fixed context for a query: concrete bytes before the window and bound
/// induction variables. Without history every lookback byte is free.
struct QueryFrame {
    const Bytes* history = nullptr;
    std::map<std::uint32_t, std::uint32_t> k;
    /// Bytes allowed for current-iteration variables; empty means 0..255.
    std::string alphabet;
    /// Current-iteration bytes [0, width) are variables even if unconstrained.
    std::uint32_t width = 0;
};

class Solver {
public:
    explicit Solver(SolverConfig cfg = {});

    const SolverConfig& config() const { return cfg_; }

    SatResult check(const Term& f);
    SatResult check(const Term& f, const QueryFrame& frame);
    bool maybe_sat(const Term& f) { return !check(f).unsat(); }
    bool is_unsat(const Term& f) { return check(f).unsat(); }

    OptResult minimize(const Term& obj, const Term& ctx);
    OptResult maximize(const Term& obj, const Term& ctx);

    /// nullopt when the solver cannot decide.
    std::optional<bool> equivalent(const Term& a, const Term& b, const Term& ctx = mk_true());

    /// Distinct assignments of current bytes [0, frame.width) satisfying f, in
    /// lexicographic order.
    std::vector<Bytes> enumerate_models(const Term& f, const QueryFrame& frame, std::size_t limit,
                                        bool* complete = nullptr);

    /// Seed 0 keeps lexicographic candidate order; other seeds shuffle it.
    std::optional<Bytes> solve_message(const std::vector<MessageStep>& steps, std::uint64_t seed = 0,
                                       const std::string& alphabet = {});

    std::uint64_t unknown_count() const { return unknowns_; }
    std::uint64_t query_count() const { return queries_; }

private:
    struct Search;
    struct CacheKey {
        Term f;
        std::map<std::uint32_t, std::uint32_t> k;
        std::uint32_t width = 0;
        std::string alphabet;
        bool operator==(const CacheKey& o) const;
    };
    struct CacheHash {
        std::size_t operator()(const CacheKey& c) const;
    };

    SolverConfig cfg_;
    std::unordered_map<CacheKey, SatResult, CacheHash> cache_;
    std::uint64_t unknowns_ = 0;
    std::uint64_t queries_ = 0;
};

/// Evaluates a constraint at a concrete message position. `pos` is the first
/// byte of the current window; lookbacks read msg[pos - d].
struct ConcreteFrame {
    std::string_view msg;
    std::size_t pos = 0;
    std::map<std::uint32_t, std::uint32_t> k;
    const PredMap* preds = nullptr;
};
enum class Truth { False, True, Unknown, OutOfRange };
/// OutOfRange: a byte outside the message or an unbound k was needed.
/// Unknown: the constraint mentions unknown intervals or streams.
Truth eval_concrete(const Term& f, const ConcreteFrame& frame);

}  // namespace statelift
