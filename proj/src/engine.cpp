#include "statelift/engine.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace statelift {

void EngineConfig::validate() const {
    if (induction_delay < 3) throw ConfigError("induction delay must be at least 3");
    if (widen_after < induction_delay) throw ConfigError("widening threshold must be at least the induction delay");
    if (k_max == 0) throw ConfigError("k-max must be positive");
    if (solver_budget_ms == 0) throw ConfigError("solver budget must be positive");
}

namespace {

constexpr std::size_t kAcc = std::numeric_limits<std::size_t>::max();
constexpr std::uint32_t kKidBase = 0x100000;

struct Restart {};

struct Node {
    std::size_t block = 0;
    Env env;
    bool start = false;
    std::ptrdiff_t parent = -1;
    std::uint32_t chain = 1;
};

struct Edge {
    std::size_t from = 0;
    std::size_t to = kAcc;
    Term label;
    std::uint32_t width = 0;
    CounterAction action = CounterAction::None;
};

struct Outgoing {
    std::size_t block = kAcc;
    Term label;
    Env entry;
};

struct Expansion {
    IterationResult iter;
    std::vector<std::set<std::size_t>> succ;  // per result
    std::vector<Outgoing> out;
};

struct Pin {
    Env env;
    bool induction = false;
    std::uint32_t kid = 0;
};

std::optional<Affine> progression(std::uint32_t x, std::uint32_t y, std::uint32_t z, std::uint32_t kid) {
    std::uint32_t d = y - x;
    if (z - y != d) return std::nullopt;
    if (d == 0) return Affine::constant(x);
    return Affine{d, x, kid};
}

std::optional<Affine> progression(const Affine& x, const Affine& y, const Affine& z, std::uint32_t kid) {
    if (!x.is_const() || !y.is_const() || !z.is_const()) return std::nullopt;
    return progression(x.b, y.b, z.b, kid);
}

std::optional<Term> anti_unify(const Term& a, const Term& b, const Term& c, std::uint32_t kid);

std::optional<Segment> anti_unify_seg(const Segment& a, const Segment& b, const Segment& c, std::uint32_t kid) {
    if (a.kind != b.kind || b.kind != c.kind) return std::nullopt;
    Segment out = a;
    switch (a.kind) {
    case Segment::Kind::Cur:
        if (a.lo != b.lo || a.lo != c.lo || a.hi != b.hi || a.hi != c.hi) return std::nullopt;
        return out;
    case Segment::Kind::Prev: {
        auto far = progression(a.far, b.far, c.far, kid);
        auto near = progression(a.near, b.near, c.near, kid);
        if (!far || !near) return std::nullopt;
        out.far = *far;
        out.near = *near;
        return out;
    }
    case Segment::Kind::Byte: {
        auto t = anti_unify(a.byte, b.byte, c.byte, kid);
        if (!t) return std::nullopt;
        out.byte = *t;
        return out;
    }
    case Segment::Kind::Top:
        if (a.tag != b.tag || a.tag != c.tag) return std::nullopt;
        return out;
    }
    return std::nullopt;
}

std::optional<Term> zip_streams(const std::vector<Segment>& a, const std::vector<Segment>& b,
                                const std::vector<Segment>& c, std::uint32_t kid) {
    if (a.size() != b.size() || b.size() != c.size()) return std::nullopt;
    std::vector<Segment> segs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto s = anti_unify_seg(a[i], b[i], c[i], kid);
        if (!s) return std::nullopt;
        segs.push_back(*s);
    }
    return mk_stream(std::move(segs));
}

// A stream one segment short may be missing an empty lookback window that
// the longer ones have grown; try each position.
std::optional<Term> anti_unify_streams(const Term& a, const Term& b, const Term& c, std::uint32_t kid) {
    std::vector<std::vector<Segment>> s{a->segs, b->segs, c->segs};
    std::size_t longest = std::max({s[0].size(), s[1].size(), s[2].size()});
    std::vector<std::size_t> shorter;
    for (std::size_t i = 0; i < 3; ++i) {
        if (s[i].size() == longest) continue;
        if (s[i].size() + 1 != longest) return std::nullopt;
        shorter.push_back(i);
    }
    if (shorter.empty()) return zip_streams(s[0], s[1], s[2], kid);
    if (shorter.size() > 1) return std::nullopt;
    std::size_t si = shorter[0];
    std::size_t ref = si == 2 ? 1 : si + 1;
    for (std::size_t pos = 0; pos < longest; ++pos) {
        const Segment& r = s[ref][pos];
        if (r.kind != Segment::Kind::Prev || !r.near.is_const()) continue;
        Segment gap;
        gap.kind = Segment::Kind::Prev;
        gap.far = gap.near = r.near;
        auto padded = s;
        padded[si].insert(padded[si].begin() + static_cast<std::ptrdiff_t>(pos), gap);
        if (auto t = zip_streams(padded[0], padded[1], padded[2], kid)) return t;
    }
    return std::nullopt;
}

std::optional<Term> anti_unify(const Term& a, const Term& b, const Term& c, std::uint32_t kid) {
    if (term_equal(a, b) && term_equal(b, c)) return a;
    if (a->kind != b->kind || b->kind != c->kind) return std::nullopt;
    switch (a->kind) {
    case Kind::Const: {
        auto p = progression(a->value, b->value, c->value, kid);
        if (!p) return std::nullopt;
        return mk_affine(*p);
    }
    case Kind::Prev: {
        auto p = progression(a->aff, b->aff, c->aff, kid);
        if (!p) return std::nullopt;
        return mk_prev(*p);
    }
    case Kind::Stream: return anti_unify_streams(a, b, c, kid);
    case Kind::Bin:
    case Kind::Ite:
    case Kind::And:
    case Kind::Or:
    case Kind::Pred: {
        if (a->op != b->op || b->op != c->op || a->name != b->name || b->name != c->name) return std::nullopt;
        if (a->kids.size() != b->kids.size() || b->kids.size() != c->kids.size()) return std::nullopt;
        std::vector<Term> ks;
        for (std::size_t i = 0; i < a->kids.size(); ++i) {
            auto t = anti_unify(a->kids[i], b->kids[i], c->kids[i], kid);
            if (!t) return std::nullopt;
            ks.push_back(*t);
        }
        switch (a->kind) {
        case Kind::Bin: return mk_bin(a->op, ks[0], ks[1]);
        case Kind::Ite: return mk_ite(ks[0], ks[1], ks[2]);
        case Kind::And: return mk_and(std::move(ks));
        case Kind::Or: return mk_or(std::move(ks));
        default: return mk_pred(a->name, std::move(ks));
        }
    }
    default: return std::nullopt;
    }
}

Env subst_env(const Env& e, std::uint32_t kid, Affine r) {
    Env out;
    for (const auto& [x, v] : e) out[x] = subst_k(v, kid, r);
    return out;
}

bool env_mentions_k(const Env& e) {
    return std::any_of(e.begin(), e.end(), [](const auto& kv) { return mentions_k(kv.second); });
}

}  // namespace

std::optional<Env> guess_induction(const Env& e1, const Env& e2, const Env& e3, std::uint32_t kid) {
    if (env_mentions_k(e1) || env_mentions_k(e2) || env_mentions_k(e3)) return std::nullopt;
    Env s;
    for (const auto& [x, v1] : e1) {
        auto i2 = e2.find(x);
        auto i3 = e3.find(x);
        if (i2 == e2.end() || i3 == e3.end()) return std::nullopt;
        auto t = anti_unify(v1, i2->second, i3->second, kid);
        if (!t) return std::nullopt;
        s[x] = *t;
    }
    if (!env_mentions_k(s)) return std::nullopt;
    try {
        const Env* seen[] = {&e1, &e2, &e3};
        for (std::uint32_t i = 0; i < 3; ++i)
            if (!env_equal(subst_env(s, kid, Affine::constant(i)), *seen[i])) return std::nullopt;
    } catch (const Error&) {
        return std::nullopt;
    }
    return s;
}

namespace {

std::size_t merge_same_entry(Fsm& f);

class Engine {
public:
    Engine(const Program& p, const EngineConfig& cfg)
        : p_(p), cfg_(cfg), solver_(SolverConfig{cfg.k_max, cfg.solver_node_budget, cfg.solver_budget_ms, nullptr}) {
        vectors_ = enumerate_vectors(p_);
        rec_sig_.resize(vectors_.size());
        init_ = init_env(p_);
        std::map<std::pair<bool, std::uint32_t>, std::set<std::size_t>> groups;
        for (std::size_t i = 0; i < vectors_.size(); ++i) groups[{vectors_[i].exiting, vectors_[i].reads}].insert(i);
        for (auto& [key, g] : groups) blocks_.push_back(std::move(g));
        sort_blocks();
    }

    Fsm run() {
        for (;;) {
            if (restarts_ >= cfg_.max_restarts && !capped_) cap();
            try {
                explore();
                if (nodes_.size() > vectors_.size()) {
                    bool changed = false;
                    for (std::size_t b = 0; b < blocks_.size(); ++b)
                        if (block_nodes(b).size() > 1 && widen_block(b, std::nullopt)) changed = true;
                    if (changed) throw Restart{};
                }
                break;
            } catch (const Restart&) {
                ++restarts_;
            }
        }
        return build();
    }

private:
    const Program& p_;
    EngineConfig cfg_;
    Solver solver_;
    std::vector<VectorInfo> vectors_;
    std::vector<std::set<std::string>> rec_sig_;
    std::vector<std::set<std::size_t>> blocks_;
    std::vector<std::set<std::string>> rel_;
    std::vector<std::size_t> block_of_;
    Env init_;
    std::map<std::set<std::size_t>, Pin> pins_;
    std::set<std::set<std::size_t>> failed_;
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::uint64_t iterations_ = 0;
    std::uint64_t restarts_ = 0;
    bool widening_used_ = false;
    bool capped_ = false;

    // -- blocks -------------------------------------------------------------

    void sort_blocks() {
        std::sort(blocks_.begin(), blocks_.end(),
                  [](const auto& a, const auto& b) { return *a.begin() < *b.begin(); });
        rel_.clear();
        block_of_.assign(vectors_.size(), 0);
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            rel_.push_back(relevant_vars(p_, vectors_, blocks_[b]));
            for (auto v : blocks_[b]) block_of_[v] = b;
        }
    }

    bool exiting(std::size_t b) const { return vectors_[*blocks_[b].begin()].exiting; }
    std::uint32_t reads(std::size_t b) const { return vectors_[*blocks_[b].begin()].reads; }
    std::uint32_t kid_of(std::size_t b) const { return kKidBase + static_cast<std::uint32_t>(*blocks_[b].begin()); }

    // Splits every block partially covered by `w`.
    bool split_by(const std::set<std::size_t>& w) {
        if (capped_) return false;
        std::vector<std::set<std::size_t>> next;
        bool changed = false;
        for (const auto& b : blocks_) {
            std::set<std::size_t> in, out;
            for (auto v : b) (w.count(v) ? in : out).insert(v);
            if (!in.empty() && !out.empty()) {
                changed = true;
                next.push_back(std::move(in));
                next.push_back(std::move(out));
            } else {
                next.push_back(b);
            }
        }
        if (changed) {
            blocks_ = std::move(next);
            sort_blocks();
        }
        return changed;
    }

    bool split_by_recursion() {
        if (capped_ || !cfg_.split_recursive) return false;
        std::vector<std::set<std::size_t>> next;
        bool changed = false;
        for (const auto& b : blocks_) {
            std::map<std::set<std::string>, std::set<std::size_t>> parts;
            for (auto v : b) parts[rec_sig_[v]].insert(v);
            if (parts.size() > 1) changed = true;
            for (auto& [sig, part] : parts) next.push_back(std::move(part));
        }
        if (changed) {
            blocks_ = std::move(next);
            sort_blocks();
        }
        return changed;
    }

    std::vector<std::size_t> block_nodes(std::size_t b) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].block == b) out.push_back(i);
        return out;
    }

    // -- environments -------------------------------------------------------

    bool value_equiv(const Term& a, const Term& b) {
        if (term_equal(a, b)) return true;
        if (is_stream(a) || is_stream(b)) return false;
        auto r = solver_.equivalent(a, b);
        return r && *r;
    }

    bool env_equiv(const Env& a, const Env& b) {
        if (a.size() != b.size()) return false;
        for (auto i = a.begin(), j = b.begin(); i != a.end(); ++i, ++j)
            if (i->first != j->first) return false;
        if (env_equal(a, b)) return true;
        for (auto i = a.begin(), j = b.begin(); i != a.end(); ++i, ++j)
            if (!value_equiv(i->second, j->second)) return false;
        return true;
    }

    bool covers(const Env& w, const Env& e) {
        if (w.size() != e.size()) return false;
        for (const auto& [x, wv] : w) {
            auto it = e.find(x);
            if (it == e.end()) return false;
            const Term& v = it->second;
            if (is_stream(wv) && wv->kind == Kind::Stream && wv->segs.size() == 1 &&
                wv->segs[0].kind == Segment::Kind::Top) {
                if (!is_stream(v)) return false;
                continue;
            }
            if (wv->kind == Kind::Interval) {
                if (is_stream(v) || mentions_k(v)) {
                    if (!(wv->lo_inf && wv->hi_inf)) return false;
                    continue;
                }
                if (!interval_covers(wv, v)) return false;
                continue;
            }
            if (!value_equiv(wv, v)) return false;
        }
        return true;
    }

    std::string widen_tag(std::size_t b, const std::string& var) const {
        return "w" + std::to_string(*blocks_[b].begin()) + "." + var;
    }

    // Pins a widened environment covering every node of block b and `extra`.
    bool widen_block(std::size_t b, const std::optional<Env>& extra) {
        std::vector<Env> envs;
        for (auto i : block_nodes(b)) envs.push_back(nodes_[i].env);
        if (extra) envs.push_back(*extra);
        auto key = blocks_[b];
        auto pit = pins_.find(key);
        bool rewiden = pit != pins_.end() && !pit->second.induction;
        Env w;
        for (const auto& x : rel_[b]) {
            std::vector<Term> vals;
            for (const auto& e : envs) {
                auto it = e.find(x);
                if (it != e.end()) vals.push_back(it->second);
            }
            if (rewiden) vals.insert(vals.begin(), pit->second.env.at(x));
            if (vals.empty()) continue;
            bool same = std::all_of(vals.begin(), vals.end(), [&](const Term& v) { return term_equal(v, vals[0]); });
            bool any_k = std::any_of(vals.begin(), vals.end(), [](const Term& v) { return mentions_k(v); });
            bool any_stream = std::any_of(vals.begin(), vals.end(), [](const Term& v) { return is_stream(v); });
            std::string tag = widen_tag(b, x);
            if (same && !any_k) {
                w[x] = vals[0];
            } else if (any_stream) {
                w[x] = mk_top_stream(tag);
            } else if (any_k) {
                w[x] = mk_full_interval(tag);
            } else if (rewiden) {
                Term acc = vals[0];
                if (acc->kind != Kind::Interval) acc = interval_of(acc, mk_true(), solver_, tag);
                for (std::size_t i = 1; i < vals.size(); ++i) acc = widen_interval(acc, vals[i]);
                w[x] = acc;
            } else {
                std::vector<std::pair<Term, Term>> hv;
                for (const auto& v : vals) hv.emplace_back(v, mk_true());
                w[x] = interval_hull(hv, solver_, tag);
            }
        }
        if (rewiden && env_equal(w, pit->second.env)) return false;
        pins_[key] = Pin{w, false, 0};
        widening_used_ = true;
        return true;
    }

    void cap() {
        capped_ = true;
        widening_used_ = true;
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            Env w;
            for (const auto& x : rel_[b]) {
                auto it = init_.find(x);
                bool stream = it != init_.end() && is_stream(it->second);
                w[x] = stream ? mk_top_stream(widen_tag(b, x)) : mk_full_interval(widen_tag(b, x));
            }
            pins_[blocks_[b]] = Pin{w, false, 0};
        }
    }

    // -- induction ----------------------------------------------------------

    bool try_induction(std::size_t b, const Env& e1, const Env& e2, const Env& e3) {
        if (env_mentions_k(e1) || env_mentions_k(e2) || env_mentions_k(e3)) return false;
        std::uint32_t kid = kid_of(b);
        auto guess = guess_induction(e1, e2, e3, kid);
        if (!guess) return false;
        const Env& s = *guess;
        try {
            Expansion ex = expand(s, b);
            Env next = subst_env(s, kid, affine_add(Affine::var(kid), 1));
            bool self = false;
            for (const auto& o : ex.out) {
                if (o.block != b) continue;
                if (!env_equiv(o.entry, next)) return false;
                self = true;
            }
            if (!self) return false;
        } catch (const Error&) {
            return false;
        }
        pins_[blocks_[b]] = Pin{s, true, kid};
        return true;
    }

    // -- exploration --------------------------------------------------------

    std::set<std::size_t> feasible(const Env& env, const Term& ctx) {
        std::set<std::size_t> out;
        for (const auto& r : abstract_iteration(p_, vectors_, env, ctx, nullptr, solver_).vectors) out.insert(r.vector);
        return out;
    }

    Env join(const std::vector<const VectorResult*>& group, const std::set<std::string>& vars, const Term& label) {
        Env out;
        for (const auto& x : vars) {
            std::vector<std::pair<Term, std::vector<Term>>> by_value;
            for (const auto* r : group) {
                auto it = r->out.find(x);
                if (it == r->out.end()) throw Error("internal: variable '" + x + "' missing from an iteration result");
                auto slot = std::find_if(by_value.begin(), by_value.end(),
                                         [&](const auto& kv) { return term_equal(kv.first, it->second); });
                if (slot == by_value.end()) {
                    by_value.push_back({it->second, {r->phi}});
                } else {
                    slot->second.push_back(r->phi);
                }
            }
            Term v = by_value.back().first;
            for (std::size_t i = by_value.size() - 1; i-- > 0;) {
                Term c = simplify(mk_or(by_value[i].second), label, solver_);
                v = mk_ite(c, by_value[i].first, v);
            }
            out[x] = v;
        }
        return out;
    }

    Expansion expand(const Env& env, std::size_t b) {
        Expansion ex;
        ex.iter = abstract_iteration(p_, vectors_, env, mk_true(), &blocks_[b], solver_);
        const auto& rs = ex.iter.vectors;
        if (exiting(b)) {
            std::vector<Term> phis;
            for (const auto& r : rs) phis.push_back(r.phi);
            if (!phis.empty()) ex.out.push_back({kAcc, simplify(mk_or(phis), mk_true(), solver_), {}});
            return ex;
        }
        std::map<std::size_t, std::vector<const VectorResult*>> targets;
        for (const auto& r : rs) {
            auto s = feasible(advance_frame(r.out, r.reads), advance_term(r.phi, r.reads));
            for (auto v : s) {
                auto& g = targets[block_of_[v]];
                if (g.empty() || g.back() != &r) g.push_back(&r);
            }
            ex.succ.push_back(std::move(s));
        }
        std::uint32_t width = reads(b);
        for (const auto& [tb, group] : targets) {
            std::vector<Term> phis;
            for (const auto* r : group) phis.push_back(r->phi);
            Term label = simplify(mk_or(phis), mk_true(), solver_);
            if (is_false(label)) continue;
            Env joined = join(group, rel_[tb], label);
            Term ctx = advance_term(label, width);
            Env entry;
            for (const auto& [x, v] : joined) entry[x] = simplify_value(advance_term(v, width), ctx, solver_);
            ex.out.push_back({tb, label, std::move(entry)});
        }
        return ex;
    }

    std::size_t add_node(std::size_t b, Env env, std::ptrdiff_t parent, bool start, std::deque<std::size_t>& work) {
        Node n;
        n.block = b;
        n.env = std::move(env);
        n.start = start;
        n.parent = parent;
        if (parent >= 0 && nodes_[static_cast<std::size_t>(parent)].block == b)
            n.chain = nodes_[static_cast<std::size_t>(parent)].chain + 1;
        nodes_.push_back(std::move(n));
        std::size_t id = nodes_.size() - 1;
        work.push_back(id);
        return id;
    }

    // Resolves an entry into block b to a node, creating it when new.
    std::pair<std::size_t, CounterAction> intern(std::size_t b, const Env& entry, std::ptrdiff_t parent, bool start,
                                                 std::deque<std::size_t>& work) {
        auto pit = pins_.find(blocks_[b]);
        if (pit != pins_.end()) {
            const Pin& pin = pit->second;
            auto pinned_node = [&]() {
                for (auto i : block_nodes(b))
                    if (env_equal(nodes_[i].env, pin.env)) return i;
                return add_node(b, pin.env, parent, start, work);
            };
            if (pin.induction) {
                if (env_equiv(entry, subst_env(pin.env, pin.kid, Affine::constant(0))))
                    return {pinned_node(), CounterAction::Reset};
                if (env_equiv(entry, subst_env(pin.env, pin.kid, affine_add(Affine::var(pin.kid), 1))))
                    return {pinned_node(), CounterAction::Increment};
                if (env_equiv(entry, pin.env)) return {pinned_node(), CounterAction::None};
            } else {
                if (covers(pin.env, entry)) return {pinned_node(), CounterAction::None};
                widen_block(b, entry);
                throw Restart{};
            }
        }
        for (auto i : block_nodes(b))
            if (env_equiv(nodes_[i].env, entry)) return {i, CounterAction::None};

        if (block_nodes(b).size() + 1 > cfg_.widen_after) {
            widen_block(b, entry);
            throw Restart{};
        }
        std::size_t id = add_node(b, entry, parent, start, work);
        const Node& n = nodes_[id];
        if (n.chain >= cfg_.induction_delay && reads(b) >= 1 && !pins_.count(blocks_[b]) &&
            !failed_.count(blocks_[b]) && !capped_) {
            const Node& p1 = nodes_[static_cast<std::size_t>(n.parent)];
            const Node& p2 = nodes_[static_cast<std::size_t>(p1.parent)];
            if (try_induction(b, p2.env, p1.env, n.env)) throw Restart{};
            failed_.insert(blocks_[b]);
        }
        return {id, CounterAction::None};
    }

    void add_edge(std::size_t from, std::size_t to, const Term& label, std::uint32_t width, CounterAction action) {
        for (auto& e : edges_) {
            if (e.from == from && e.to == to && e.action == action) {
                e.label = simplify(mk_or(e.label, label), mk_true(), solver_);
                return;
            }
        }
        edges_.push_back({from, to, label, width, action});
    }

    void explore() {
        nodes_.clear();
        edges_.clear();
        std::set<std::size_t> w_init = feasible(init_, mk_true());
        if (split_by(w_init)) throw Restart{};
        std::deque<std::size_t> work;
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            bool any = std::any_of(blocks_[b].begin(), blocks_[b].end(), [&](auto v) { return w_init.count(v) > 0; });
            if (!any) continue;
            auto [id, action] = intern(b, restrict_env(init_, rel_[b]), -1, true, work);
            nodes_[id].start = true;
        }
        while (!work.empty()) {
            std::size_t id = work.front();
            work.pop_front();
            ++iterations_;
            std::size_t b = nodes_[id].block;
            Env env = nodes_[id].env;
            Expansion ex = expand(env, b);

            bool rec_changed = false;
            for (const auto& r : ex.iter.vectors) {
                auto& sig = rec_sig_[r.vector];
                for (const auto& x : r.recursive) rec_changed = sig.insert(x).second || rec_changed;
            }
            if (rec_changed && split_by_recursion()) throw Restart{};

            std::set<std::size_t> w;
            for (const auto& s : ex.succ) w.insert(s.begin(), s.end());
            if (split_by(w)) throw Restart{};

            for (const auto& o : ex.out) {
                if (o.block == kAcc) {
                    add_edge(id, kAcc, o.label, reads(b), CounterAction::None);
                    continue;
                }
                auto [to, action] = intern(o.block, o.entry, static_cast<std::ptrdiff_t>(id), false, work);
                add_edge(id, to, o.label, reads(b), action);
            }
        }
    }

    // -- output -------------------------------------------------------------

    Fsm build() {
        Fsm f;
        std::map<std::uint32_t, std::uint32_t> kid_to_state;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            FsmState s;
            s.id = static_cast<std::uint32_t>(i);
            s.start = nodes_[i].start;
            auto pit = pins_.find(blocks_[nodes_[i].block]);
            if (pit != pins_.end() && pit->second.induction && env_equal(pit->second.env, nodes_[i].env)) {
                s.induction = true;
                kid_to_state[pit->second.kid] = s.id;
            }
            f.states.push_back(s);
        }
        bool need_acc = std::any_of(edges_.begin(), edges_.end(), [](const Edge& e) { return e.to == kAcc; });
        std::uint32_t acc = static_cast<std::uint32_t>(f.states.size());
        if (need_acc) {
            FsmState s;
            s.id = acc;
            s.final = true;
            s.sink = true;
            f.states.push_back(s);
        }
        auto rename = [&](Term t) {
            for (const auto& [kid, sid] : kid_to_state) t = rename_kid(t, kid, sid);
            return t;
        };
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            Env e;
            for (const auto& [x, v] : nodes_[i].env) e[x] = rename(v);
            f.states[i].note = print_env(e);
        }
        for (const auto& e : edges_) {
            FsmTransition t;
            t.from = static_cast<std::uint32_t>(e.from);
            t.to = e.to == kAcc ? acc : static_cast<std::uint32_t>(e.to);
            t.constraint = rename(e.label);
            t.width = e.width;
            t.action = e.action;
            f.transitions.push_back(t);
        }

        prune_fsm(f, solver_);
        hoist_lookback_conjuncts(f, solver_);
        // A state whose only way out is an unconditional empty step into the
        // sink is itself final.
        for (auto& s : f.states) {
            auto out = f.outgoing(s.id);
            if (out.size() != 1) continue;
            const auto& t = f.transitions[out[0]];
            if (t.width == 0 && is_true(t.constraint) && f.states[t.to].sink) {
                s.final = true;
                f.transitions.erase(f.transitions.begin() + static_cast<std::ptrdiff_t>(out[0]));
            }
        }
        merge_same_entry(f);
        prune_fsm(f, solver_);
        bfs_renumber(f);

        f.stats.widening_used = widening_used_;
        f.stats.iterations = iterations_;
        f.stats.restarts = restarts_;
        f.stats.unknowns = solver_.unknown_count();
        f.stats.decision_vectors = vectors_.size();
        f.stats.approximate = widening_used_ || f.stats.unknowns > 0 || capped_;
        f.metadata["induction_delay"] = std::to_string(cfg_.induction_delay);
        f.metadata["k_max"] = std::to_string(cfg_.k_max);
        f.metadata["widen_after"] = std::to_string(cfg_.widen_after);
        return f;
    }

    static void bfs_renumber(Fsm& f);
};

// Applies a state permutation; states mapped to -1 are dropped with their
// transitions. Counters follow their induction states.
void remap_states(Fsm& f, const std::vector<std::ptrdiff_t>& new_id) {
    std::map<std::uint32_t, std::uint32_t> kids;
    for (const auto& s : f.states)
        if (s.induction && new_id[s.id] >= 0) kids[s.id] = static_cast<std::uint32_t>(new_id[s.id]);
    auto rename = [&](Term t) {
        for (const auto& [from, to] : kids) t = rename_kid(t, from, kKidBase * 2 + from);
        for (const auto& [from, to] : kids) t = rename_kid(t, kKidBase * 2 + from, to);
        return t;
    };
    std::size_t count = 0;
    for (auto v : new_id)
        if (v >= 0) ++count;
    std::vector<FsmState> states(count);
    for (const auto& s : f.states) {
        if (new_id[s.id] < 0) continue;
        FsmState c = s;
        c.id = static_cast<std::uint32_t>(new_id[s.id]);
        states[c.id] = c;
    }
    std::vector<FsmTransition> ts;
    for (const auto& t : f.transitions) {
        if (new_id[t.from] < 0 || new_id[t.to] < 0) continue;
        FsmTransition c = t;
        c.from = static_cast<std::uint32_t>(new_id[t.from]);
        c.to = static_cast<std::uint32_t>(new_id[t.to]);
        c.constraint = rename(t.constraint);
        ts.push_back(c);
    }
    f.states = std::move(states);
    f.transitions = std::move(ts);
}

// Two plain states entered by the same transitions from the same sources are
// reached by the same words, so they can share one set of outgoing edges.
std::size_t merge_same_entry(Fsm& f) {
    auto same_edge = [](const FsmTransition& a, const FsmTransition& b) {
        return a.from == b.from && a.to == b.to && a.width == b.width && a.action == b.action &&
               term_equal(a.constraint, b.constraint);
    };
    std::size_t merged = 0;
    for (bool progress = true; progress;) {
        progress = false;
        for (std::size_t a = 0; a < f.states.size() && !progress; ++a) {
            for (std::size_t b = a + 1; b < f.states.size() && !progress; ++b) {
                const auto& sa = f.states[a];
                const auto& sb = f.states[b];
                if (sa.induction || sb.induction || sa.sink || sb.sink) continue;
                if (sa.start != sb.start || sa.final != sb.final) continue;
                auto entries = [&](std::size_t s) {
                    std::vector<FsmTransition> in;
                    for (const auto& t : f.transitions) {
                        if (t.to != s) continue;
                        FsmTransition c = t;
                        if (c.from == b) c.from = static_cast<std::uint32_t>(a);
                        c.to = static_cast<std::uint32_t>(a);
                        in.push_back(c);
                    }
                    return in;
                };
                auto ia = entries(a), ib = entries(b);
                auto covered = [&](const std::vector<FsmTransition>& xs, const std::vector<FsmTransition>& ys) {
                    return std::all_of(xs.begin(), xs.end(), [&](const FsmTransition& x) {
                        return std::any_of(ys.begin(), ys.end(), [&](const FsmTransition& y) { return same_edge(x, y); });
                    });
                };
                if (ia.empty() && !sa.start) continue;
                if (!covered(ia, ib) || !covered(ib, ia)) continue;
                std::vector<FsmTransition> ts;
                for (auto t : f.transitions) {
                    if (t.from == b) t.from = static_cast<std::uint32_t>(a);
                    if (t.to == b) t.to = static_cast<std::uint32_t>(a);
                    bool dup = std::any_of(ts.begin(), ts.end(), [&](const FsmTransition& u) { return same_edge(t, u); });
                    if (!dup) ts.push_back(t);
                }
                f.transitions = std::move(ts);
                std::vector<std::ptrdiff_t> new_id(f.states.size());
                for (std::size_t i = 0; i < new_id.size(); ++i)
                    new_id[i] = i < b ? static_cast<std::ptrdiff_t>(i) : static_cast<std::ptrdiff_t>(i) - 1;
                new_id[b] = -1;
                remap_states(f, new_id);
                ++merged;
                progress = true;
            }
        }
    }
    return merged;
}

void Engine::bfs_renumber(Fsm& f) {
    std::vector<std::ptrdiff_t> new_id(f.states.size(), -1);
    std::deque<std::uint32_t> q;
    std::ptrdiff_t next = 0;
    for (auto s : f.starts()) {
        new_id[s] = next++;
        q.push_back(s);
    }
    while (!q.empty()) {
        auto s = q.front();
        q.pop_front();
        for (auto ti : f.outgoing(s)) {
            auto to = f.transitions[ti].to;
            if (new_id[to] >= 0) continue;
            new_id[to] = next++;
            q.push_back(to);
        }
    }
    for (auto& v : new_id)
        if (v < 0) v = next++;
    remap_states(f, new_id);
    std::stable_sort(f.transitions.begin(), f.transitions.end(),
                     [](const FsmTransition& a, const FsmTransition& b) { return a.from < b.from; });
}

}  // namespace

void prune_fsm(Fsm& f, Solver& solver) {
    std::erase_if(f.transitions, [&](const FsmTransition& t) { return solver.is_unsat(t.constraint); });
    std::size_t n = f.states.size();
    std::vector<bool> fwd(n, false), bwd(n, false);
    std::deque<std::uint32_t> q;
    for (auto s : f.starts()) {
        fwd[s] = true;
        q.push_back(s);
    }
    while (!q.empty()) {
        auto s = q.front();
        q.pop_front();
        for (const auto& t : f.transitions)
            if (t.from == s && !fwd[t.to]) {
                fwd[t.to] = true;
                q.push_back(t.to);
            }
    }
    for (auto s : f.finals()) {
        bwd[s] = true;
        q.push_back(s);
    }
    while (!q.empty()) {
        auto s = q.front();
        q.pop_front();
        for (const auto& t : f.transitions)
            if (t.to == s && !bwd[t.from]) {
                bwd[t.from] = true;
                q.push_back(t.from);
            }
    }
    std::vector<std::ptrdiff_t> new_id(n, -1);
    std::ptrdiff_t next = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (fwd[i] && bwd[i]) new_id[i] = next++;
    remap_states(f, new_id);
}

std::size_t hoist_lookback_conjuncts(Fsm& f, Solver& solver) {
    (void)solver;
    std::size_t changed = 0;
    for (bool progress = true; progress;) {
        progress = false;
        for (const auto& s : f.states) {
            if (s.start || s.final || s.sink) continue;
            auto out = f.outgoing(s.id);
            std::vector<std::size_t> in;
            bool self = false;
            for (std::size_t i = 0; i < f.transitions.size(); ++i) {
                if (f.transitions[i].to != s.id) continue;
                if (f.transitions[i].from == s.id) self = true;
                in.push_back(i);
            }
            if (self || out.empty() || in.empty()) continue;
            for (const auto& c : conjuncts(f.transitions[out[0]].constraint)) {
                TermInfo ci = term_info(c);
                if (!ci.has_prev || ci.has_cur || !ci.kids.empty()) continue;
                bool shared = std::all_of(out.begin(), out.end(), [&](std::size_t ti) {
                    auto cs = conjuncts(f.transitions[ti].constraint);
                    return std::any_of(cs.begin(), cs.end(), [&](const Term& d) { return term_equal(c, d); });
                });
                if (!shared) continue;
                std::vector<Term> moved;
                for (auto ti : in) {
                    auto r = retreat_term(c, f.transitions[ti].width);
                    if (!r || term_info(*r).has_prev) break;
                    moved.push_back(*r);
                }
                if (moved.size() != in.size()) continue;
                for (std::size_t i = 0; i < in.size(); ++i) {
                    auto& t = f.transitions[in[i]];
                    t.constraint = mk_and(t.constraint, moved[i]);
                }
                for (auto ti : out) {
                    std::vector<Term> rest;
                    for (const auto& d : conjuncts(f.transitions[ti].constraint))
                        if (!term_equal(c, d)) rest.push_back(d);
                    f.transitions[ti].constraint = mk_and(std::move(rest));
                }
                ++changed;
                progress = true;
                break;
            }
        }
    }
    return changed;
}

Fsm infer_fsm(const Program& p, const EngineConfig& cfg) {
    cfg.validate();
    Engine e(p, cfg);
    return e.run();
}

}  // namespace statelift
