#pragma once

#include "statelift/solver.hpp"

namespace statelift {

class JsonSchemaError : public Error {
public:
    using Error::Error;
};

/// Effect of a transition on the counter of an induction state. Counters are
/// keyed by the target state's id, which is also the id of its `k`.
enum class CounterAction { None, Reset, Increment };

std::string_view to_string(CounterAction a);

struct FsmState {
    std::uint32_t id = 0;
    bool start = false;
    bool final = false;
    bool induction = false;
    /// Accepting sink added for exits that read bytes; not an engine state.
    bool sink = false;
    std::string note;  // free text, e.g. the entry environment

    bool operator==(const FsmState&) const = default;
};

struct FsmTransition {
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    Term constraint;
    std::uint32_t width = 0;  // bytes consumed
    CounterAction action = CounterAction::None;

    bool k_param() const { return mentions_k(constraint); }
};

struct FsmStats {
    bool widening_used = false;
    bool approximate = false;
    std::uint64_t iterations = 0;
    std::uint64_t restarts = 0;
    std::uint64_t unknowns = 0;
    std::uint64_t decision_vectors = 0;
};

/// Nondeterministic machine over byte windows. states[i].id == i.
struct Fsm {
    std::vector<FsmState> states;
    std::vector<FsmTransition> transitions;
    FsmStats stats;
    std::map<std::string, std::string> metadata;

    std::vector<std::uint32_t> starts() const;
    std::vector<std::uint32_t> finals() const;
    /// States excluding the accepting sink.
    std::size_t engine_state_count() const;
    std::vector<std::size_t> outgoing(std::uint32_t state) const;
};

/// Same states, flags and transitions (constraints compared structurally).
bool fsm_equal(const Fsm& a, const Fsm& b);

struct AcceptOptions {
    std::uint32_t k_max = 16;
    const PredMap* preds = nullptr;
    /// Cap on accepting paths counted by parse_message.
    std::size_t max_paths = 16;
    std::uint64_t step_budget = 2'000'000;
};

struct ParseResult {
    bool accepted = false;
    std::vector<std::size_t> path;  // transition indices of the first accepting path
    std::map<std::uint32_t, std::uint32_t> k;  // counters at the end of that path
    std::size_t ambiguity = 0;  // accepting paths found, capped
    bool k_bound_exceeded = false;
};

/// Some start-to-final path partitions msg exactly into windows whose
/// constraints hold. Labels that cannot be decided concretely count as true.
bool accepts(const Fsm& f, std::string_view msg, const AcceptOptions& opts = {});
/// First accepting path in transition-index order, plus the ambiguity count.
ParseResult parse_message(const Fsm& f, std::string_view msg, const AcceptOptions& opts = {});

/// Splits top-level disjunctions into parallel transitions and conjunctions
/// over disjoint consecutive windows into chains through fresh states.
Fsm normalize(const Fsm& f);

struct GenOptions {
    std::size_t max_count = 100;
    std::size_t max_len = 8;
    std::uint64_t seed = 0;
    std::uint32_t k_max = 16;
    std::string alphabet;  // empty: any byte
    const PredMap* preds = nullptr;
    std::size_t max_paths = 100'000;
};

/// Breadth-first over start-to-final paths of the normalized machine, one
/// solved message per path, each checked with accepts().
std::vector<Bytes> generate_messages(const Fsm& f, const GenOptions& opts);

std::string export_json(const Fsm& f);
Fsm import_json(std::string_view text);
std::string export_dot(const Fsm& f);

}  // namespace statelift
