#pragma once

#include "statelift/fsm.hpp"

namespace statelift {

/// A start-to-final walk: transition indices in order.
using FsmPath = std::vector<std::size_t>;

struct PathEnumOptions {
    std::size_t cap = 10'000;
    /// Longest path, in transitions, explored before giving up.
    std::size_t max_len = 64;
    std::uint32_t k_max = 16;
};

/// Paths of a (normalized) machine by increasing length, ties in
/// transition-index order.
std::vector<FsmPath> enumerate_gt_paths(const Fsm& gt, const PathEnumOptions& opts = {});

struct PathDetail {
    Bytes message;
    bool solved = false;
    bool parsed = false;
    std::size_t correct = 0;    // T(p')
    std::size_t incorrect = 0;  // F(p')
    std::size_t truth = 0;      // T(p)
    std::size_t ambiguity = 0;
};

struct EvalReport {
    double precision = 1.0;
    double recall = 1.0;
    std::size_t paths_compared = 0;
    std::size_t unsolvable = 0;
    std::size_t unparsable = 0;
    std::vector<PathDetail> paths;
};

struct EvalOptions {
    PathEnumOptions paths;
    const PredMap* preds = nullptr;
    std::string alphabet;  // for message synthesis; empty means any byte
};

/// Per-path transition matching of an inferred machine against ground truth.
EvalReport precision_recall(const Fsm& inferred, const Fsm& gt, const EvalOptions& opts = {});

enum class Disagreement { SoundnessViolation, CompletenessGap };

struct EquivReport {
    std::size_t checked = 0;
    std::vector<std::pair<Bytes, Disagreement>> disagreements;

    std::size_t count(Disagreement d) const;
};

struct EquivOptions {
    std::string alphabet = "abcd";
    std::size_t max_len = 5;
    const PredMap* preds = nullptr;
    std::uint32_t k_max = 16;
    std::uint32_t guard = 4;
    std::size_t budget = 4'000'000;  // messages
};

/// Compares the loop and the machine on every message up to max_len.
EquivReport language_equiv(const Program& p, const Fsm& f, const EquivOptions& opts = {});

std::string report_json(const EvalReport& r);
std::string report_table(const EvalReport& r);
std::string report_json(const EquivReport& r);

}  // namespace statelift
