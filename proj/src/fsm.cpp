#include "statelift/fsm.hpp"

#include <json.hpp>

#include <deque>
#include <sstream>

namespace statelift {

std::string_view to_string(CounterAction a) {
    switch (a) {
    case CounterAction::None: return "none";
    case CounterAction::Reset: return "reset";
    case CounterAction::Increment: return "increment";
    }
    return "none";
}

std::vector<std::uint32_t> Fsm::starts() const {
    std::vector<std::uint32_t> out;
    for (const auto& s : states)
        if (s.start) out.push_back(s.id);
    return out;
}

std::vector<std::uint32_t> Fsm::finals() const {
    std::vector<std::uint32_t> out;
    for (const auto& s : states)
        if (s.final) out.push_back(s.id);
    return out;
}

std::size_t Fsm::engine_state_count() const {
    std::size_t n = 0;
    for (const auto& s : states)
        if (!s.sink) ++n;
    return n;
}

std::vector<std::size_t> Fsm::outgoing(std::uint32_t state) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < transitions.size(); ++i)
        if (transitions[i].from == state) out.push_back(i);
    return out;
}

bool fsm_equal(const Fsm& a, const Fsm& b) {
    if (a.states.size() != b.states.size() || a.transitions.size() != b.transitions.size()) return false;
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        const auto& x = a.states[i];
        const auto& y = b.states[i];
        if (x.id != y.id || x.start != y.start || x.final != y.final || x.induction != y.induction || x.sink != y.sink)
            return false;
    }
    for (std::size_t i = 0; i < a.transitions.size(); ++i) {
        const auto& x = a.transitions[i];
        const auto& y = b.transitions[i];
        if (x.from != y.from || x.to != y.to || x.width != y.width || x.action != y.action ||
            !term_equal(x.constraint, y.constraint))
            return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

class Simulator {
public:
    Simulator(const Fsm& f, std::string_view msg, const AcceptOptions& o) : f_(f), msg_(msg), o_(o) {
        for (const auto& s : f.states)
            if (s.induction) slot_[s.id] = slot_.size();
        out_.resize(f.states.size());
        for (std::size_t i = 0; i < f.transitions.size(); ++i) out_[f.transitions[i].from].push_back(i);
    }

    using Counters = std::vector<std::uint32_t>;

    // Applies transition ti at pos; false when it cannot be taken.
    bool take(std::size_t ti, std::size_t pos, Counters& ctr) {
        const auto& t = f_.transitions[ti];
        if (pos + t.width > msg_.size()) return false;
        ConcreteFrame fr;
        fr.msg = msg_;
        fr.pos = pos;
        fr.preds = o_.preds;
        for (const auto& [sid, idx] : slot_) fr.k[sid] = ctr[idx];
        Truth v = eval_concrete(t.constraint, fr);
        if (v == Truth::False || v == Truth::OutOfRange) return false;
        auto it = slot_.find(t.to);
        if (it != slot_.end()) {
            if (t.action == CounterAction::Reset) {
                ctr[it->second] = 0;
            } else if (t.action == CounterAction::Increment) {
                if (ctr[it->second] >= o_.k_max) {
                    exceeded_ = true;
                    return false;
                }
                ++ctr[it->second];
            }
        }
        return true;
    }

    bool accepts() {
        for (auto s : f_.starts())
            if (reach(s, 0, Counters(slot_.size(), 0))) return true;
        return false;
    }

    ParseResult parse() {
        ParseResult r;
        std::vector<std::size_t> path;
        std::set<std::tuple<std::uint32_t, std::size_t, Counters>> on_path;
        for (auto s : f_.starts()) {
            enumerate(s, 0, Counters(slot_.size(), 0), path, on_path, r);
            if (r.ambiguity >= o_.max_paths || steps_ > o_.step_budget) break;
        }
        r.accepted = r.ambiguity > 0;
        r.k_bound_exceeded = exceeded_;
        return r;
    }

    bool exceeded() const { return exceeded_; }

private:
    const Fsm& f_;
    std::string_view msg_;
    const AcceptOptions& o_;
    std::map<std::uint32_t, std::size_t> slot_;
    std::vector<std::vector<std::size_t>> out_;
    std::set<std::tuple<std::uint32_t, std::size_t, Counters>> seen_;
    std::uint64_t steps_ = 0;
    bool exceeded_ = false;

    bool reach(std::uint32_t s, std::size_t pos, Counters ctr) {
        if (f_.states[s].final && pos == msg_.size()) return true;
        if (!seen_.emplace(s, pos, ctr).second) return false;
        for (auto ti : out_[s]) {
            Counters next = ctr;
            if (take(ti, pos, next) && reach(f_.transitions[ti].to, pos + f_.transitions[ti].width, std::move(next)))
                return true;
        }
        return false;
    }

    void enumerate(std::uint32_t s, std::size_t pos, Counters ctr, std::vector<std::size_t>& path,
                   std::set<std::tuple<std::uint32_t, std::size_t, Counters>>& on_path, ParseResult& r) {
        if (r.ambiguity >= o_.max_paths || ++steps_ > o_.step_budget) return;
        if (f_.states[s].final && pos == msg_.size()) {
            if (r.ambiguity++ == 0) {
                r.path = path;
                for (const auto& [sid, idx] : slot_) r.k[sid] = ctr[idx];
            }
        }
        auto key = std::make_tuple(s, pos, ctr);
        if (!on_path.insert(key).second) return;
        for (auto ti : out_[s]) {
            Counters next = ctr;
            if (!take(ti, pos, next)) continue;
            path.push_back(ti);
            enumerate(f_.transitions[ti].to, pos + f_.transitions[ti].width, std::move(next), path, on_path, r);
            path.pop_back();
        }
        on_path.erase(key);
    }
};

void collect_cur(const Term& t, std::set<std::uint32_t>& out) {
    if (t->kind == Kind::Cur) out.insert(t->value);
    for (const auto& k : t->kids) collect_cur(k, out);
    for (const auto& s : t->segs) {
        if (s.kind == Segment::Kind::Cur)
            for (auto i = s.lo; i < s.hi; ++i) out.insert(i);
        if (s.byte) collect_cur(s.byte, out);
    }
}

}  // namespace

bool accepts(const Fsm& f, std::string_view msg, const AcceptOptions& opts) {
    Simulator sim(f, msg, opts);
    return sim.accepts();
}

ParseResult parse_message(const Fsm& f, std::string_view msg, const AcceptOptions& opts) {
    Simulator sim(f, msg, opts);
    return sim.parse();
}

// ---------------------------------------------------------------------------
// Normalization

Fsm normalize(const Fsm& f) {
    Fsm out = f;
    out.transitions.clear();
    std::deque<FsmTransition> work(f.transitions.begin(), f.transitions.end());
    while (!work.empty()) {
        FsmTransition t = work.front();
        work.pop_front();
        if (t.constraint->kind == Kind::Or) {
            for (const auto& d : t.constraint->kids) {
                FsmTransition c = t;
                c.constraint = d;
                work.push_back(c);
            }
            continue;
        }
        bool split = false;
        if (t.width > 1) {
            auto cs = conjuncts(t.constraint);
            std::vector<std::set<std::uint32_t>> bytes(cs.size());
            for (std::size_t i = 0; i < cs.size(); ++i) collect_cur(cs[i], bytes[i]);
            for (std::uint32_t cut = 1; cut < t.width && !split; ++cut) {
                std::vector<Term> first, second;
                bool ok = true;
                for (std::size_t i = 0; i < cs.size() && ok; ++i) {
                    const auto& b = bytes[i];
                    if (b.empty() || *b.rbegin() < cut) {
                        first.push_back(cs[i]);
                    } else if (*b.begin() >= cut) {
                        second.push_back(cs[i]);
                    } else {
                        ok = false;
                    }
                }
                if (!ok || first.empty() || second.empty()) continue;
                FsmState mid;
                mid.id = static_cast<std::uint32_t>(out.states.size());
                mid.note = "split";
                out.states.push_back(mid);
                FsmTransition a = t;
                a.to = mid.id;
                a.width = cut;
                a.constraint = mk_and(std::move(first));
                a.action = CounterAction::None;
                FsmTransition b = t;
                b.from = mid.id;
                b.width = t.width - cut;
                b.constraint = shift_frame(mk_and(std::move(second)), cut);
                work.push_back(a);
                work.push_back(b);
                split = true;
            }
        }
        if (!split) out.transitions.push_back(t);
    }
    std::stable_sort(out.transitions.begin(), out.transitions.end(),
                     [](const FsmTransition& a, const FsmTransition& b) { return a.from < b.from; });
    return out;
}

// ---------------------------------------------------------------------------
// Generation

std::vector<Bytes> generate_messages(const Fsm& f, const GenOptions& opts) {
    std::vector<Bytes> result;
    if (opts.max_count == 0) return result;
    Fsm n = normalize(f);
    std::map<std::uint32_t, std::size_t> slot;
    for (const auto& s : n.states)
        if (s.induction) slot[s.id] = slot.size();

    struct Partial {
        std::uint32_t state;
        std::size_t len;
        std::vector<MessageStep> steps;
        std::vector<std::uint32_t> ctr;
    };
    std::deque<Partial> q;
    for (auto s : n.starts()) q.push_back({s, 0, {}, std::vector<std::uint32_t>(slot.size(), 0)});

    SolverConfig sc;
    sc.k_max = opts.k_max;
    sc.preds = opts.preds;
    Solver solver(sc);
    AcceptOptions ao;
    ao.k_max = opts.k_max;
    ao.preds = opts.preds;
    std::set<Bytes> seen;
    std::size_t max_steps = opts.max_len + n.states.size();
    std::size_t expanded = 0;
    auto outgoing = [&](std::uint32_t s) { return n.outgoing(s); };

    while (!q.empty() && result.size() < opts.max_count && expanded < opts.max_paths) {
        Partial p = std::move(q.front());
        q.pop_front();
        ++expanded;
        if (n.states[p.state].final) {
            if (auto msg = solver.solve_message(p.steps, opts.seed, opts.alphabet)) {
                if (!seen.count(*msg) && accepts(f, *msg, ao)) {
                    seen.insert(*msg);
                    result.push_back(*msg);
                    if (result.size() >= opts.max_count) break;
                }
            }
        }
        if (p.steps.size() >= max_steps) continue;
        for (auto ti : outgoing(p.state)) {
            const auto& t = n.transitions[ti];
            if (p.len + t.width > opts.max_len) continue;
            Partial next = p;
            MessageStep st;
            st.constraint = t.constraint;
            st.width = t.width;
            for (const auto& [sid, idx] : slot) st.k[sid] = p.ctr[idx];
            auto it = slot.find(t.to);
            if (it != slot.end()) {
                if (t.action == CounterAction::Reset) next.ctr[it->second] = 0;
                if (t.action == CounterAction::Increment) {
                    if (next.ctr[it->second] >= opts.k_max) continue;
                    ++next.ctr[it->second];
                }
            }
            next.steps.push_back(std::move(st));
            next.state = t.to;
            next.len += t.width;
            q.push_back(std::move(next));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

CounterAction action_from(const std::string& s) {
    if (s == "none") return CounterAction::None;
    if (s == "reset") return CounterAction::Reset;
    if (s == "increment") return CounterAction::Increment;
    throw JsonSchemaError("unknown counter action '" + s + "'");
}

template <class T>
T field(const json& j, const char* key, const char* where) {
    if (!j.is_object() || !j.contains(key)) throw JsonSchemaError(std::string(where) + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw JsonSchemaError(std::string(where) + ": '" + key + "' has the wrong type");
    }
}

template <class T>
T field_or(const json& j, const char* key, T dflt, const char* where) {
    if (!j.contains(key)) return dflt;
    return field<T>(j, key, where);
}

}  // namespace

std::string export_json(const Fsm& f) {
    json j;
    j["format"] = "statelift-fsm";
    j["version"] = kSchemaVersion;
    j["states"] = json::array();
    for (const auto& s : f.states) {
        j["states"].push_back({{"id", s.id},
                               {"start", s.start},
                               {"final", s.final},
                               {"induction", s.induction},
                               {"sink", s.sink},
                               {"note", s.note}});
    }
    j["transitions"] = json::array();
    for (const auto& t : f.transitions) {
        j["transitions"].push_back({{"from", t.from},
                                    {"to", t.to},
                                    {"width", t.width},
                                    {"constraint", print_term(t.constraint, {t.width, false})},
                                    {"action", std::string(to_string(t.action))},
                                    {"k_param", t.k_param()}});
    }
    j["stats"] = {{"widening_used", f.stats.widening_used},
                  {"approximate", f.stats.approximate},
                  {"iterations", f.stats.iterations},
                  {"restarts", f.stats.restarts},
                  {"unknowns", f.stats.unknowns},
                  {"decision_vectors", f.stats.decision_vectors}};
    j["metadata"] = f.metadata;
    return j.dump(2) + "\n";
}

Fsm import_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw JsonSchemaError(std::string("not JSON: ") + e.what());
    }
    if (!j.is_object()) throw JsonSchemaError("document must be an object");
    if (field<std::string>(j, "format", "document") != "statelift-fsm")
        throw JsonSchemaError("document: unexpected format");
    if (field<int>(j, "version", "document") != kSchemaVersion) throw JsonSchemaError("document: unsupported version");
    if (!j.contains("states") || !j["states"].is_array()) throw JsonSchemaError("document: 'states' must be an array");
    if (!j.contains("transitions") || !j["transitions"].is_array())
        throw JsonSchemaError("document: 'transitions' must be an array");

    Fsm f;
    for (const auto& s : j["states"]) {
        FsmState st;
        st.id = field<std::uint32_t>(s, "id", "state");
        st.start = field<bool>(s, "start", "state");
        st.final = field<bool>(s, "final", "state");
        st.induction = field_or<bool>(s, "induction", false, "state");
        st.sink = field_or<bool>(s, "sink", false, "state");
        st.note = field_or<std::string>(s, "note", "", "state");
        if (st.id != f.states.size()) throw JsonSchemaError("state ids must be 0, 1, 2, ... in order");
        f.states.push_back(st);
    }
    for (const auto& t : j["transitions"]) {
        FsmTransition tr;
        tr.from = field<std::uint32_t>(t, "from", "transition");
        tr.to = field<std::uint32_t>(t, "to", "transition");
        tr.width = field<std::uint32_t>(t, "width", "transition");
        tr.action = action_from(field_or<std::string>(t, "action", "none", "transition"));
        if (tr.from >= f.states.size() || tr.to >= f.states.size())
            throw JsonSchemaError("transition endpoint out of range");
        try {
            tr.constraint = parse_term(field<std::string>(t, "constraint", "transition"));
        } catch (const JsonSchemaError&) {
            throw;
        } catch (const Error& e) {
            throw JsonSchemaError(std::string("bad constraint: ") + e.what());
        }
        f.transitions.push_back(tr);
    }
    if (j.contains("stats")) {
        const auto& s = j["stats"];
        f.stats.widening_used = field_or<bool>(s, "widening_used", false, "stats");
        f.stats.approximate = field_or<bool>(s, "approximate", false, "stats");
        f.stats.iterations = field_or<std::uint64_t>(s, "iterations", 0, "stats");
        f.stats.restarts = field_or<std::uint64_t>(s, "restarts", 0, "stats");
        f.stats.unknowns = field_or<std::uint64_t>(s, "unknowns", 0, "stats");
        f.stats.decision_vectors = field_or<std::uint64_t>(s, "decision_vectors", 0, "stats");
    }
    if (j.contains("metadata")) {
        if (!j["metadata"].is_object()) throw JsonSchemaError("metadata must be an object");
        for (const auto& [k, v] : j["metadata"].items()) {
            if (!v.is_string()) throw JsonSchemaError("metadata values must be strings");
            f.metadata[k] = v.get<std::string>();
        }
    }
    return f;
}

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

std::string export_dot(const Fsm& f) {
    std::size_t inductions = 0;
    for (const auto& s : f.states)
        if (s.induction) ++inductions;
    std::ostringstream os;
    os << "digraph fsm {\n  rankdir=LR;\n";
    for (const auto& s : f.states) {
        os << "  q" << s.id << " [shape=" << (s.final ? "doublecircle" : "circle") << ", label=\"q" << s.id
           << (s.induction ? " (k)" : "") << "\"];\n";
    }
    for (const auto& s : f.states) {
        if (!s.start) continue;
        os << "  start" << s.id << " [shape=point];\n  start" << s.id << " -> q" << s.id << ";\n";
    }
    for (const auto& t : f.transitions) {
        std::string label = print_term(t.constraint, {t.width, inductions <= 1});
        if (t.action == CounterAction::Reset) label += " / k := 0";
        if (t.action == CounterAction::Increment) label += " / k += 1";
        os << "  q" << t.from << " -> q" << t.to << " [label=\"" << dot_escape(label) << "\"];\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace statelift
