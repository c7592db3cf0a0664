#include "statelift/eval.hpp"

#include <json.hpp>

#include <cstdio>
#include <deque>
#include <sstream>

namespace statelift {

namespace {

std::map<std::uint32_t, std::size_t> counter_slots(const Fsm& f) {
    std::map<std::uint32_t, std::size_t> slot;
    for (const auto& s : f.states)
        if (s.induction) slot[s.id] = slot.size();
    return slot;
}

// Message steps of a path with counters bound; empty when a counter would
// pass k_max.
std::optional<std::vector<MessageStep>> path_steps(const Fsm& f, const FsmPath& path, std::uint32_t k_max) {
    auto slot = counter_slots(f);
    std::vector<std::uint32_t> ctr(slot.size(), 0);
    std::vector<MessageStep> steps;
    for (auto ti : path) {
        const auto& t = f.transitions[ti];
        MessageStep st;
        st.constraint = t.constraint;
        st.width = t.width;
        for (const auto& [sid, idx] : slot) st.k[sid] = ctr[idx];
        steps.push_back(std::move(st));
        auto it = slot.find(t.to);
        if (it == slot.end()) continue;
        if (t.action == CounterAction::Reset) ctr[it->second] = 0;
        if (t.action == CounterAction::Increment) {
            if (ctr[it->second] >= k_max) return std::nullopt;
            ++ctr[it->second];
        }
    }
    return steps;
}

Term bind_k(Term t, const std::map<std::uint32_t, std::uint32_t>& k) {
    for (const auto& [kid, v] : k) t = subst_k(t, kid, Affine::constant(v));
    return t;
}

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::vector<FsmPath> enumerate_gt_paths(const Fsm& gt, const PathEnumOptions& opts) {
    std::vector<FsmPath> out;
    if (opts.cap == 0) return out;
    auto slot = counter_slots(gt);
    struct Partial {
        std::uint32_t state;
        FsmPath path;
        std::vector<std::uint32_t> ctr;
    };
    std::vector<std::vector<std::size_t>> outgoing(gt.states.size());
    for (std::size_t i = 0; i < gt.transitions.size(); ++i) outgoing[gt.transitions[i].from].push_back(i);

    std::deque<Partial> q;
    for (auto s : gt.starts()) q.push_back({s, {}, std::vector<std::uint32_t>(slot.size(), 0)});
    std::size_t expansions = 0;
    const std::size_t expansion_cap = opts.cap * 1000 + 100'000;
    while (!q.empty() && out.size() < opts.cap && expansions < expansion_cap) {
        Partial p = std::move(q.front());
        q.pop_front();
        ++expansions;
        if (gt.states[p.state].final && !p.path.empty()) {
            out.push_back(p.path);
            if (out.size() >= opts.cap) break;
        }
        if (p.path.size() >= opts.max_len) continue;
        for (auto ti : outgoing[p.state]) {
            const auto& t = gt.transitions[ti];
            Partial next{t.to, p.path, p.ctr};
            auto it = slot.find(t.to);
            if (it != slot.end()) {
                if (t.action == CounterAction::Reset) next.ctr[it->second] = 0;
                if (t.action == CounterAction::Increment) {
                    if (next.ctr[it->second] >= opts.k_max) continue;
                    ++next.ctr[it->second];
                }
            }
            next.path.push_back(ti);
            q.push_back(std::move(next));
        }
    }
    return out;
}

EvalReport precision_recall(const Fsm& inferred, const Fsm& gt, const EvalOptions& opts) {
    Fsm inf = normalize(inferred);
    Fsm truth = normalize(gt);
    SolverConfig sc;
    sc.k_max = opts.paths.k_max;
    sc.preds = opts.preds;
    Solver solver(sc);
    AcceptOptions ao;
    ao.k_max = opts.paths.k_max;
    ao.preds = opts.preds;

    EvalReport rep;
    std::size_t correct = 0, inferred_total = 0, truth_total = 0;
    for (const auto& p : enumerate_gt_paths(truth, opts.paths)) {
        PathDetail d;
        d.truth = p.size();
        auto steps = path_steps(truth, p, opts.paths.k_max);
        std::optional<Bytes> msg;
        if (steps) msg = solver.solve_message(*steps, 0, opts.alphabet);
        if (!msg) {
            ++rep.unsolvable;
            rep.paths.push_back(d);
            continue;
        }
        d.solved = true;
        d.message = *msg;
        ++rep.paths_compared;
        truth_total += d.truth;
        ParseResult pr = parse_message(inf, *msg, ao);
        d.ambiguity = pr.ambiguity;
        if (!pr.accepted) {
            ++rep.unparsable;
            rep.paths.push_back(d);
            continue;
        }
        d.parsed = true;
        auto isteps = path_steps(inf, pr.path, opts.paths.k_max);
        std::size_t n = std::min(p.size(), pr.path.size());
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = (*isteps)[i];
            const auto& b = (*steps)[i];
            bool ok = false;
            if (a.width == b.width) {
                auto eq = solver.equivalent(bind_k(a.constraint, a.k), bind_k(b.constraint, b.k));
                ok = eq && *eq;
            }
            if (ok) ++d.correct;
        }
        d.incorrect = pr.path.size() - d.correct;
        correct += d.correct;
        inferred_total += pr.path.size();
        rep.paths.push_back(d);
    }
    rep.precision = ratio(correct, inferred_total);
    rep.recall = ratio(correct, truth_total);
    return rep;
}

std::size_t EquivReport::count(Disagreement d) const {
    std::size_t n = 0;
    for (const auto& [m, kind] : disagreements)
        if (kind == d) ++n;
    return n;
}

EquivReport language_equiv(const Program& p, const Fsm& f, const EquivOptions& opts) {
    std::string alpha;
    for (char c : std::set<char>(opts.alphabet.begin(), opts.alphabet.end())) alpha.push_back(c);
    std::size_t total = 0, level = 1;
    for (std::size_t len = 0; len <= opts.max_len; ++len) {
        total += level;
        if (total > opts.budget) throw BudgetExceeded("message space exceeds the budget");
        level *= std::max<std::size_t>(alpha.size(), 1);
    }
    PredMap none;
    const PredMap& preds = opts.preds ? *opts.preds : none;
    AcceptOptions ao;
    ao.k_max = opts.k_max;
    ao.preds = opts.preds;
    RunOptions ro;
    ro.guard = opts.guard;

    EquivReport rep;
    std::vector<Bytes> frontier{Bytes{}};
    for (std::size_t len = 0; len <= opts.max_len; ++len) {
        std::vector<Bytes> next;
        for (const auto& m : frontier) {
            ++rep.checked;
            bool loop = concrete_run(p, m, preds, ro).accepted;
            bool fsm = accepts(f, m, ao);
            if (loop && !fsm) rep.disagreements.emplace_back(m, Disagreement::SoundnessViolation);
            if (!loop && fsm) rep.disagreements.emplace_back(m, Disagreement::CompletenessGap);
            if (len < opts.max_len)
                for (char c : alpha) next.push_back(m + c);
        }
        frontier = std::move(next);
    }
    return rep;
}

std::string report_json(const EvalReport& r) {
    nlohmann::json j;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["paths_compared"] = r.paths_compared;
    j["unsolvable"] = r.unsolvable;
    j["unparsable"] = r.unparsable;
    j["paths"] = nlohmann::json::array();
    for (const auto& d : r.paths) {
        j["paths"].push_back({{"message", render_bytes(d.message)},
                              {"solved", d.solved},
                              {"parsed", d.parsed},
                              {"correct", d.correct},
                              {"incorrect", d.incorrect},
                              {"truth", d.truth},
                              {"ambiguity", d.ambiguity}});
    }
    return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& r) {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "precision %.4f  recall %.4f  paths %zu  unsolvable %zu  unparsable %zu\n",
                  r.precision, r.recall, r.paths_compared, r.unsolvable, r.unparsable);
    os << buf;
    os << "message              T(p')  F(p')  T(p)\n";
    for (const auto& d : r.paths) {
        if (!d.solved) continue;
        std::snprintf(buf, sizeof buf, "%-20s %5zu  %5zu  %4zu%s\n", render_bytes(d.message).c_str(), d.correct,
                      d.incorrect, d.truth, d.parsed ? "" : "  (unparsed)");
        os << buf;
    }
    return os.str();
}

std::string report_json(const EquivReport& r) {
    nlohmann::json j;
    j["checked"] = r.checked;
    j["soundness_violations"] = r.count(Disagreement::SoundnessViolation);
    j["completeness_gaps"] = r.count(Disagreement::CompletenessGap);
    j["disagreements"] = nlohmann::json::array();
    for (const auto& [m, kind] : r.disagreements) {
        j["disagreements"].push_back(
            {{"message", render_bytes(m)},
             {"kind", kind == Disagreement::SoundnessViolation ? "soundness-violation" : "completeness-gap"}});
    }
    return j.dump(2) + "\n";
}

}  // namespace statelift
