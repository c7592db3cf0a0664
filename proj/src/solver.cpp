#include "statelift/solver.hpp"

#include <algorithm>
#include <random>
#include <unordered_map>

namespace statelift {

namespace {

using Clock = std::chrono::steady_clock;

bool definitely_true(Range r) { return r.lo > 0; }
bool definitely_false(Range r) { return r.lo == 0 && r.hi == 0; }

bool args_have_top(const Term& t) {
    for (const auto& s : t->segs)
        if (s.kind == Segment::Kind::Top) return true;
    for (const auto& k : t->kids)
        if (args_have_top(k)) return true;
    return false;
}

std::string render_value(const Value& v) {
    if (const auto* i = std::get_if<std::uint32_t>(&v)) return std::to_string(*i);
    return "\"" + render_bytes(std::get<Bytes>(v)) + "\"";
}

Range call_impl(const PredImpl& impl, const std::vector<Value>& args) {
    bool r = impl(args);
    return {r ? 1u : 0u, r ? 1u : 0u};
}

class ConcreteVal : public Valuation {
public:
    explicit ConcreteVal(const ConcreteFrame& f) : f_(f) {}

    Range cur(std::uint32_t i) override {
        std::size_t at = f_.pos + i;
        if (at >= f_.msg.size()) {
            out_of_range = true;
            return {0, 255};
        }
        auto b = static_cast<std::uint32_t>(static_cast<unsigned char>(f_.msg[at]));
        return {b, b};
    }
    Range prev(std::uint32_t d) override {
        if (d == 0 || d > f_.pos) {
            out_of_range = true;
            return {0, 255};
        }
        auto b = static_cast<std::uint32_t>(static_cast<unsigned char>(f_.msg[f_.pos - d]));
        return {b, b};
    }
    std::optional<std::uint32_t> kvalue(std::uint32_t kid) override {
        auto it = f_.k.find(kid);
        if (it == f_.k.end()) {
            out_of_range = true;
            return std::nullopt;
        }
        return it->second;
    }
    Range pred(const Node& app, const std::vector<Value>* args) override {
        if (!args) return {0, 1};
        const PredImpl* impl = nullptr;
        if (f_.preds) {
            auto it = f_.preds->find(app.name);
            if (it != f_.preds->end() && it->second) impl = &it->second;
        }
        if (!impl) throw MissingPredicateImpl("no implementation for predicate '" + app.name + "'");
        return call_impl(*impl, *args);
    }

    bool out_of_range = false;

private:
    const ConcreteFrame& f_;
};

std::size_t node_count(const Term& t) {
    std::size_t n = 1;
    for (const auto& k : t->kids) n += node_count(k);
    return n;
}

// Replaces every occurrence of `from` outside byte streams by `to`.
Term replace_subterm(const Term& t, const Term& from, const Term& to) {
    if (term_equal(t, from)) return to;
    if (t->kids.empty() || is_stream(t)) return t;
    std::vector<Term> kids;
    bool changed = false;
    for (const auto& k : t->kids) {
        kids.push_back(replace_subterm(k, from, to));
        changed = changed || kids.back() != k;
    }
    if (!changed) return t;
    switch (t->kind) {
    case Kind::Bin: return mk_bin(t->op, kids[0], kids[1]);
    case Kind::Ite: return mk_ite(kids[0], kids[1], kids[2]);
    case Kind::And: return mk_and(std::move(kids));
    case Kind::Or: return mk_or(std::move(kids));
    case Kind::Pred: return mk_pred(t->name, std::move(kids));
    default: return t;
    }
}

// f && a == b is equivalent to f[big := small] && a == b; rewriting the
// other conjuncts with each top-level equation exposes contradictions the
// range evaluation cannot see.
Term rewrite_equations(const Term& f) {
    constexpr int kRounds = 16;
    Term cur = f;
    for (int round = 0; round < kRounds; ++round) {
        std::vector<Term> cs = conjuncts(cur);
        bool changed = false;
        for (std::size_t i = 0; i < cs.size() && !changed; ++i) {
            // A conjunct holds wherever it reappears, its negation fails.
            Term neg = mk_not(cs[i]);
            std::vector<Term> next{cs[i]};
            for (std::size_t j = 0; j < cs.size(); ++j) {
                if (j == i) continue;
                Term r = replace_subterm(replace_subterm(cs[j], cs[i], mk_true()), neg, mk_false());
                if (r != cs[j]) changed = true;
                next.push_back(r);
            }
            if (changed) cur = mk_and(std::move(next));
        }
        for (std::size_t i = 0; i < cs.size() && !changed; ++i) {
            const Term& eq = cs[i];
            if (eq->kind != Kind::Bin || eq->op != BinOp::Eq) continue;
            Term a = eq->kids[0];
            Term b = eq->kids[1];
            if (is_stream(a) || is_stream(b)) continue;
            auto rank = [](const Term& t) { return std::make_pair(!is_const(t), node_count(t)); };
            if (rank(b) > rank(a) || (rank(b) == rank(a) && term_compare(b, a) > 0)) std::swap(a, b);
            // a is the bigger side and gets replaced.
            std::vector<Term> next{eq};
            for (std::size_t j = 0; j < cs.size(); ++j) {
                if (j == i) continue;
                Term r = replace_subterm(cs[j], a, b);
                if (r != cs[j]) changed = true;
                next.push_back(r);
            }
            if (changed) cur = mk_and(std::move(next));
        }
        if (!changed || is_false(cur)) break;
    }
    return cur;
}

}  // namespace

Truth eval_concrete(const Term& f, const ConcreteFrame& frame) {
    ConcreteVal v(frame);
    Range r = eval_range(f, v);
    if (v.out_of_range) return Truth::OutOfRange;
    if (definitely_true(r)) return Truth::True;
    if (definitely_false(r)) return Truth::False;
    return Truth::Unknown;
}

// ---------------------------------------------------------------------------

struct Solver::Search : Valuation {
    enum class R { Found, None, Budget };

    struct Var {
        enum class Kind { Cur, Prev, Ival } kind;
        std::uint32_t key = 0;
        std::string tag;
        const std::vector<std::uint32_t>* vals = nullptr;
    };

    Solver& solver;
    const QueryFrame& frame;
    Clock::time_point deadline;
    std::uint64_t nodes = 0;
    std::function<bool(const Model&)> on_model;  // returns true to stop
    std::vector<std::uint32_t> alphabet;

    // per-k state
    Term f;
    std::map<std::uint32_t, std::uint32_t> kvals;
    std::vector<Var> vars;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> box;
    std::vector<int> cur_var;
    std::map<std::uint32_t, int> prev_var;
    std::map<std::string, int> ival_var;
    std::vector<Term> free_preds;
    std::unordered_map<const Node*, int> free_idx;
    std::vector<int> pred_val;
    bool out_of_range = false;
    // Directed search splits a variable of the first undecided conjunct;
    // otherwise variables split in declaration order (lexicographic models).
    bool directed = false;
    std::vector<Term> parts;
    std::vector<std::vector<int>> part_vars;
    std::vector<std::vector<std::uint32_t>> part_consts;
    std::optional<std::uint32_t> picked_pivot;

    Search(Solver& s, const QueryFrame& fr)
        : solver(s), frame(fr), deadline(Clock::now() + std::chrono::milliseconds(s.cfg_.budget_ms)) {
        for (unsigned char c : std::set<char>(fr.alphabet.begin(), fr.alphabet.end())) alphabet.push_back(c);
        std::sort(alphabet.begin(), alphabet.end());
    }

    // Valuation ------------------------------------------------------------
    Range var_range(int v) const {
        const auto& [lo, hi] = box[static_cast<std::size_t>(v)];
        const Var& var = vars[static_cast<std::size_t>(v)];
        if (var.vals) return {(*var.vals)[lo], (*var.vals)[hi]};
        return {lo, hi};
    }
    std::uint32_t var_value(int v) const { return var_range(v).lo; }

    Range cur(std::uint32_t i) override {
        if (i < cur_var.size() && cur_var[i] >= 0) return var_range(cur_var[i]);
        return {0, 255};
    }
    Range prev(std::uint32_t d) override {
        if (frame.history) {
            const Bytes& h = *frame.history;
            if (d == 0 || d > h.size()) {
                out_of_range = true;
                return {0, 255};
            }
            auto b = static_cast<std::uint32_t>(static_cast<unsigned char>(h[h.size() - d]));
            return {b, b};
        }
        auto it = prev_var.find(d);
        if (it == prev_var.end()) return {0, 255};
        return var_range(it->second);
    }
    std::optional<std::uint32_t> kvalue(std::uint32_t kid) override {
        auto it = kvals.find(kid);
        if (it == kvals.end()) return std::nullopt;
        return it->second;
    }
    Range interval(const Node& n) override {
        auto it = ival_var.find(n.name);
        if (it == ival_var.end()) return {n.lo, n.hi};
        return var_range(it->second);
    }
    Range pred(const Node& app, const std::vector<Value>* args) override {
        auto it = free_idx.find(&app);
        if (it != free_idx.end()) {
            int v = pred_val[static_cast<std::size_t>(it->second)];
            if (v < 0) return {0, 1};
            return {static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v)};
        }
        if (!args) return {0, 1};
        return call_impl(solver.cfg_.preds->at(app.name), *args);
    }

    // Setup ----------------------------------------------------------------
    bool has_impl(const std::string& name) const {
        if (!solver.cfg_.preds) return false;
        auto it = solver.cfg_.preds->find(name);
        return it != solver.cfg_.preds->end() && it->second;
    }

    void collect(const Term& t, std::set<std::uint32_t>& curs, std::set<std::uint32_t>& prevs,
                 std::map<std::string, std::pair<std::uint32_t, std::uint32_t>>& ivals,
                 std::unordered_map<const Node*, bool>& seen) {
        if (!seen.emplace(t.get(), true).second) return;
        switch (t->kind) {
        case Kind::Cur: curs.insert(t->value); break;
        case Kind::Prev: prevs.insert(t->aff.b); break;
        case Kind::Interval: {
            auto [it, fresh] = ivals.emplace(t->name, std::make_pair(t->lo, t->hi));
            if (!fresh) {
                it->second.first = std::max(it->second.first, t->lo);
                it->second.second = std::min(it->second.second, t->hi);
            }
            break;
        }
        case Kind::Pred:
            if (!has_impl(t->name) || args_have_top(t)) {
                if (free_idx.emplace(t.get(), static_cast<int>(free_preds.size())).second) free_preds.push_back(t);
            }
            break;
        case Kind::Stream:
            for (const auto& s : t->segs) {
                if (s.kind == Segment::Kind::Cur)
                    for (std::uint32_t i = s.lo; i < s.hi; ++i) curs.insert(i);
                if (s.kind == Segment::Kind::Prev)
                    for (std::uint32_t d = s.far.b; d > s.near.b; --d) prevs.insert(d);
                if (s.byte) collect(s.byte, curs, prevs, ivals, seen);
            }
            break;
        default: break;
        }
        for (const auto& k : t->kids) collect(k, curs, prevs, ivals, seen);
    }

    // Returns false when the interval domains are empty.
    bool setup(const Term& term) {
        f = rewrite_equations(term);
        if (is_false(f)) return false;
        vars.clear();
        box.clear();
        cur_var.clear();
        prev_var.clear();
        ival_var.clear();
        free_preds.clear();
        free_idx.clear();
        std::set<std::uint32_t> curs;
        std::set<std::uint32_t> prevs;
        std::map<std::string, std::pair<std::uint32_t, std::uint32_t>> ivals;
        std::unordered_map<const Node*, bool> seen;
        collect(f, curs, prevs, ivals, seen);
        for (std::uint32_t i = 0; i < frame.width; ++i) curs.insert(i);
        if (!curs.empty()) cur_var.assign(*curs.rbegin() + 1, -1);
        for (auto i : curs) {
            cur_var[i] = static_cast<int>(vars.size());
            Var v{Var::Kind::Cur, i, {}, nullptr};
            if (!alphabet.empty()) {
                v.vals = &alphabet;
                box.emplace_back(0, static_cast<std::uint32_t>(alphabet.size() - 1));
            } else {
                box.emplace_back(0, 255);
            }
            vars.push_back(v);
        }
        if (!frame.history) {
            for (auto d : prevs) {
                prev_var[d] = static_cast<int>(vars.size());
                vars.push_back({Var::Kind::Prev, d, {}, nullptr});
                box.emplace_back(0, 255);
            }
        }
        for (const auto& [tag, b] : ivals) {
            if (b.first > b.second) return false;
            ival_var[tag] = static_cast<int>(vars.size());
            vars.push_back({Var::Kind::Ival, 0, tag, nullptr});
            box.push_back(b);
        }
        pred_val.assign(free_preds.size(), -1);
        parts = conjuncts(f);
        part_vars.clear();
        part_consts.clear();
        for (const auto& c : parts) {
            std::set<int> vs;
            std::set<std::uint32_t> cs;
            std::unordered_map<const Node*, bool> seen_c;
            mentioned(c, vs, cs, seen_c);
            part_vars.emplace_back(vs.begin(), vs.end());
            part_consts.emplace_back(cs.begin(), cs.end());
        }
        return true;
    }

    void mentioned(const Term& t, std::set<int>& out, std::set<std::uint32_t>& consts,
                   std::unordered_map<const Node*, bool>& seen) {
        if (!seen.emplace(t.get(), true).second) return;
        auto add_cur = [&](std::uint32_t i) {
            if (i < cur_var.size() && cur_var[i] >= 0) out.insert(cur_var[i]);
        };
        auto add_prev = [&](std::uint32_t d) {
            auto it = prev_var.find(d);
            if (it != prev_var.end()) out.insert(it->second);
        };
        switch (t->kind) {
        case Kind::Const: consts.insert(t->value); break;
        case Kind::Cur: add_cur(t->value); break;
        case Kind::Prev: add_prev(t->aff.b); break;
        case Kind::Interval: {
            auto it = ival_var.find(t->name);
            if (it != ival_var.end()) out.insert(it->second);
            break;
        }
        case Kind::Stream:
            for (const auto& sg : t->segs) {
                if (sg.kind == Segment::Kind::Cur)
                    for (std::uint32_t i = sg.lo; i < sg.hi; ++i) add_cur(i);
                if (sg.kind == Segment::Kind::Prev)
                    for (std::uint32_t d = sg.far.b; d > sg.near.b; --d) add_prev(d);
                if (sg.byte) mentioned(sg.byte, out, consts, seen);
            }
            break;
        default: break;
        }
        for (const auto& k : t->kids) mentioned(k, out, consts, seen);
    }

    // Rewrites t with every subterm the box already decides folded to a
    // constant, so relations the range evaluation misses (x + 1 != x + 1)
    // fold away.
    Term partial(const Term& t) {
        if (is_stream(t) || t->kind == Kind::Const) return t;
        out_of_range = false;
        Range r = eval_range(t, *this);
        if (r.singleton() && !out_of_range) return mk_const(r.lo);
        switch (t->kind) {
        case Kind::Ite: return mk_ite(partial(t->kids[0]), partial(t->kids[1]), partial(t->kids[2]));
        case Kind::Bin:
            if (t->op == BinOp::Append || is_stream(t->kids[0]) || is_stream(t->kids[1])) return t;
            return mk_bin(t->op, partial(t->kids[0]), partial(t->kids[1]));
        case Kind::And:
        case Kind::Or: {
            std::vector<Term> xs;
            for (const auto& k : t->kids) xs.push_back(partial(k));
            return t->kind == Kind::And ? mk_and(std::move(xs)) : mk_or(std::move(xs));
        }
        default: return t;
        }
    }

    // Picks an open variable of the first undecided conjunct, preferring one
    // with a pivot, then the narrowest; -2 when some conjunct is already
    // false, -1 when every conjunct holds.
    int pick_directed() {
        picked_pivot.reset();
        int fallback = -1;
        std::vector<Term> folds;
        if (!frame.history) {
            // Folding can expose contradictions between conjuncts, e.g.
            // s + x == 200 and x != 200 once s is fixed at 0.
            for (const auto& c : parts) folds.push_back(partial(c));
            if (is_false(mk_and(folds))) return -2;
        }
        for (std::size_t i = 0; i < parts.size(); ++i) {
            out_of_range = false;
            Range r = eval_range(parts[i], *this);
            if (definitely_false(r)) return -2;
            if (definitely_true(r) && !out_of_range) continue;
            const std::vector<int>* pvars = &part_vars[i];
            const std::vector<std::uint32_t>* pconsts = &part_consts[i];
            std::vector<int> fvars;
            std::vector<std::uint32_t> fconsts;
            if (!frame.history) {
                const Term& folded = folds[i];
                if (is_false(folded)) return -2;
                if (is_true(folded)) continue;
                if (!term_equal(folded, parts[i])) {
                    std::set<int> vs;
                    std::set<std::uint32_t> cs;
                    std::unordered_map<const Node*, bool> seen;
                    mentioned(folded, vs, cs, seen);
                    fvars.assign(vs.begin(), vs.end());
                    fconsts.assign(cs.begin(), cs.end());
                    pvars = &fvars;
                    pconsts = &fconsts;
                }
            }
            int best = -1;
            std::pair<bool, std::uint64_t> rank{true, 0};
            std::optional<std::uint32_t> best_pivot;
            for (int v : *pvars) {
                const auto& b = box[static_cast<std::size_t>(v)];
                if (b.first == b.second) continue;
                auto pv = pivot(v, *pvars, *pconsts);
                std::pair<bool, std::uint64_t> rk{!pv, static_cast<std::uint64_t>(b.second) - b.first};
                if (best < 0 || rk < rank) {
                    best = v;
                    rank = rk;
                    best_pivot = pv;
                }
            }
            if (best >= 0) {
                picked_pivot = best_pivot;
                return best;
            }
            if (fallback < 0) fallback = first_open();
        }
        return fallback;
    }

    int first_open() const {
        for (std::size_t v = 0; v < box.size(); ++v)
            if (box[v].first != box[v].second) return static_cast<int>(v);
        return -1;
    }

    // Search ---------------------------------------------------------------
    bool over_budget() {
        ++nodes;
        if (nodes > solver.cfg_.node_budget) return true;
        if ((nodes & 0x3ff) == 0 && Clock::now() > deadline) return true;
        return false;
    }

    Range eval() {
        out_of_range = false;
        return eval_range(f, *this);
    }

    // Ground key of a free predicate at the current point.
    std::string ground_key(const Term& app) {
        std::string key = app->name + "(";
        for (std::size_t i = 0; i < app->kids.size(); ++i) {
            if (i) key += ",";
            const Term& a = app->kids[i];
            if (is_stream(a)) {
                StreamValue s = eval_stream(a, *this);
                key += s.known ? render_value(s.bytes) : "?" + print_term(a);
            } else {
                Range r = eval_range(a, *this);
                key += r.singleton() ? std::to_string(r.lo) : "?" + print_term(a);
            }
        }
        return key + ")";
    }

    std::optional<Model> point_model() {
        Model m;
        for (std::size_t i = 0; i < free_preds.size(); ++i) {
            std::string key = ground_key(free_preds[i]);
            bool val = pred_val[i] > 0;
            auto [it, fresh] = m.preds.emplace(key, val);
            if (!fresh && it->second != val) return std::nullopt;
        }
        for (std::size_t v = 0; v < vars.size(); ++v) {
            std::uint32_t x = var_value(static_cast<int>(v));
            switch (vars[v].kind) {
            case Var::Kind::Cur: m.cur[vars[v].key] = static_cast<std::uint8_t>(x); break;
            case Var::Kind::Prev: m.prev[vars[v].key] = static_cast<std::uint8_t>(x); break;
            case Var::Kind::Ival: m.intervals[vars[v].tag] = x; break;
            }
        }
        m.k = kvals;
        return m;
    }

    R box_search() {
        if (over_budget()) return R::Budget;
        Range r = eval();
        if (definitely_false(r)) return R::None;
        int split = first_open();
        if (directed && split >= 0) {
            int d = pick_directed();
            if (d == -2) return R::None;
            if (d == -1) {
                // Every conjunct holds on the whole box: try its low corner.
                auto saved = box;
                for (auto& b : box) b.second = b.first;
                Range pr = eval();
                R res = R::None;
                if (!out_of_range && definitely_true(pr)) {
                    auto m = point_model();
                    if (m && on_model(*m)) res = R::Found;
                }
                box = saved;
                if (res == R::Found) return res;
            } else {
                split = d;
            }
        }
        if (split < 0) {
            if (out_of_range || !definitely_true(r)) return R::None;
            auto m = point_model();
            if (!m) return R::None;
            return on_model(*m) ? R::Found : R::None;
        }
        auto saved = box[static_cast<std::size_t>(split)];
        std::vector<std::pair<std::uint32_t, std::uint32_t>> pieces;
        auto pv = directed ? picked_pivot : std::nullopt;
        if (pv) {
            if (*pv > saved.first) pieces.emplace_back(saved.first, *pv - 1);
            pieces.emplace_back(*pv, *pv);
            if (*pv < saved.second) pieces.emplace_back(*pv + 1, saved.second);
        } else {
            std::uint32_t mid = saved.first + (saved.second - saved.first) / 2;
            pieces.emplace_back(saved.first, mid);
            pieces.emplace_back(mid + 1, saved.second);
        }
        R a = R::None;
        for (const auto& piece : pieces) {
            box[static_cast<std::size_t>(split)] = piece;
            a = box_search();
            if (a != R::None) break;
        }
        box[static_cast<std::size_t>(split)] = saved;
        return a;
    }

    // A value the conjunct compares against, in box coordinates: one of its
    // constants or the value of another fixed variable.
    std::optional<std::uint32_t> pivot(int v, const std::vector<int>& others, const std::vector<std::uint32_t>& consts) {
        const auto& b = box[static_cast<std::size_t>(v)];
        const Var& var = vars[static_cast<std::size_t>(v)];
        auto to_box = [&](std::uint32_t x) -> std::optional<std::uint32_t> {
            if (!var.vals) return x;
            auto it = std::lower_bound(var.vals->begin(), var.vals->end(), x);
            if (it == var.vals->end() || *it != x) return std::nullopt;
            return static_cast<std::uint32_t>(it - var.vals->begin());
        };
        std::optional<std::uint32_t> best;
        auto offer = [&](std::uint32_t x) {
            auto c = to_box(x);
            if (c && *c >= b.first && *c <= b.second && (!best || *c < *best)) best = c;
        };
        for (int o : others) {
            const auto& ob = box[static_cast<std::size_t>(o)];
            if (o != v && ob.first == ob.second) offer(var_value(o));
        }
        if (best) return best;
        for (auto c : consts) offer(c);
        return best;
    }

    R pred_search(std::size_t i) {
        if (i == free_preds.size()) return box_search();
        if (over_budget()) return R::Budget;
        for (int v = 0; v <= 1; ++v) {
            pred_val[i] = v;
            if (definitely_false(eval())) continue;
            R r = pred_search(i + 1);
            if (r != R::None) {
                pred_val[i] = -1;
                return r;
            }
        }
        pred_val[i] = -1;
        return R::None;
    }

    // Directed search first splits on the disjuncts of a top-level
    // disjunction; each case is rewritten by its own equations.
    static constexpr std::size_t kMaxCases = 256;
    std::size_t cases = 0;

    R case_search(const Term& t) {
        if (over_budget()) return R::Budget;
        Term g = rewrite_equations(t);
        if (is_false(g)) return R::None;
        std::vector<Term> cs = conjuncts(g);
        int pick = -1;
        for (std::size_t i = 0; i < cs.size(); ++i) {
            if (cs[i]->kind != Kind::Or) continue;
            if (pick < 0 || cs[i]->kids.size() < cs[static_cast<std::size_t>(pick)]->kids.size())
                pick = static_cast<int>(i);
        }
        if (!directed || pick < 0 || cases + cs[static_cast<std::size_t>(pick)]->kids.size() > kMaxCases) {
            if (!setup(g)) return R::None;
            return pred_search(0);
        }
        const Term split = cs[static_cast<std::size_t>(pick)];
        cases += split->kids.size();
        std::vector<Term> rest;
        for (std::size_t i = 0; i < cs.size(); ++i)
            if (static_cast<int>(i) != pick) rest.push_back(cs[i]);
        bool budget = false;
        for (std::size_t d = 0; d < split->kids.size(); ++d) {
            std::vector<Term> branch = rest;
            branch.push_back(split->kids[d]);
            for (std::size_t e = 0; e < d; ++e) branch.push_back(mk_not(split->kids[e]));
            R r = case_search(mk_and(std::move(branch)));
            if (r == R::Found) return r;
            if (r == R::Budget) budget = true;
        }
        return budget ? R::Budget : R::None;
    }

    R k_search(const Term& t, std::vector<std::uint32_t> kids, std::size_t i) {
        if (i == kids.size()) return case_search(t);
        bool budget = false;
        for (std::uint32_t kv = 0; kv <= solver.cfg_.k_max; ++kv) {
            Term sub;
            try {
                sub = subst_k(t, kids[i], Affine::constant(kv));
            } catch (const Error&) {
                continue;
            }
            kvals[kids[i]] = kv;
            R r = k_search(sub, kids, i + 1);
            kvals.erase(kids[i]);
            if (r == R::Found) return r;
            if (r == R::Budget) budget = true;
        }
        return budget ? R::Budget : R::None;
    }

    R run(const Term& t) {
        Term g = t;
        for (const auto& [kid, v] : frame.k) g = subst_k(g, kid, Affine::constant(v));
        kvals = frame.k;
        auto info = term_info(g);
        std::vector<std::uint32_t> kids(info.kids.begin(), info.kids.end());
        return k_search(g, kids, 0);
    }
};

Solver::Solver(SolverConfig cfg) : cfg_(cfg) {}

SatResult Solver::check(const Term& f) { return check(f, QueryFrame{}); }

bool Solver::CacheKey::operator==(const CacheKey& o) const {
    return width == o.width && k == o.k && alphabet == o.alphabet && term_equal(f, o.f);
}

std::size_t Solver::CacheHash::operator()(const CacheKey& c) const {
    std::size_t h = c.f->hash ^ (std::hash<std::string>()(c.alphabet) << 1) ^ (c.width * 0x9e3779b97f4a7c15ULL);
    for (const auto& [kid, v] : c.k) h = h * 31 + kid * 7 + v;
    return h;
}

SatResult Solver::check(const Term& f, const QueryFrame& frame) {
    ++queries_;
    SatResult res;
    if (is_false(f)) {
        res.status = SatStatus::Unsat;
        return res;
    }
    std::optional<CacheKey> key;
    if (!frame.history) {
        key = CacheKey{f, frame.k, frame.width, frame.alphabet};
        auto it = cache_.find(*key);
        if (it != cache_.end()) {
            if (it->second.status == SatStatus::Unknown) ++unknowns_;
            return it->second;
        }
    }
    Search s(*this, frame);
    s.on_model = [&](const Model& m) {
        res.model = m;
        return true;
    };
    s.directed = true;
    switch (s.run(f)) {
    case Search::R::Found: res.status = SatStatus::Sat; break;
    case Search::R::None: res.status = SatStatus::Unsat; break;
    case Search::R::Budget:
        res.status = SatStatus::Unknown;
        res.reason = "solver budget exhausted";
        ++unknowns_;
        break;
    }
    if (key) cache_.emplace(std::move(*key), res);
    return res;
}

OptResult Solver::minimize(const Term& obj, const Term& ctx) {
    OptResult out;
    SatResult base = check(ctx);
    if (base.status != SatStatus::Sat) {
        out.status = base.status;
        return out;
    }
    Range r = static_range(obj);
    std::uint32_t lo = r.lo;
    std::uint32_t hi = r.hi;
    while (lo < hi) {
        std::uint32_t mid = lo + (hi - lo) / 2;
        SatResult q = check(mk_and(ctx, mk_bin(BinOp::Le, obj, mk_const(mid))));
        if (q.status == SatStatus::Unknown) return out;
        if (q.sat()) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    out.status = SatStatus::Sat;
    out.value = lo;
    return out;
}

OptResult Solver::maximize(const Term& obj, const Term& ctx) {
    OptResult out;
    SatResult base = check(ctx);
    if (base.status != SatStatus::Sat) {
        out.status = base.status;
        return out;
    }
    Range r = static_range(obj);
    std::uint32_t lo = r.lo;
    std::uint32_t hi = r.hi;
    while (lo < hi) {
        std::uint32_t mid = lo + (hi - lo) / 2 + 1;
        SatResult q = check(mk_and(ctx, mk_bin(BinOp::Ge, obj, mk_const(mid))));
        if (q.status == SatStatus::Unknown) return out;
        if (q.sat()) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    out.status = SatStatus::Sat;
    out.value = lo;
    return out;
}

std::optional<bool> Solver::equivalent(const Term& a, const Term& b, const Term& ctx) {
    if (term_equal(a, b)) return true;
    if (is_stream(a) || is_stream(b)) return std::nullopt;
    SatResult r = check(mk_and(ctx, mk_bin(BinOp::Ne, a, b)));
    if (r.unsat()) return true;
    if (r.sat()) return false;
    return std::nullopt;
}

std::vector<Bytes> Solver::enumerate_models(const Term& f, const QueryFrame& frame, std::size_t limit,
                                            bool* complete) {
    ++queries_;
    std::set<Bytes> found;
    if (complete) *complete = true;
    if (limit == 0 || is_false(f)) return {};
    Search s(*this, frame);
    s.on_model = [&](const Model& m) {
        Bytes b;
        for (std::uint32_t i = 0; i < frame.width; ++i) {
            auto it = m.cur.find(i);
            b.push_back(static_cast<char>(it == m.cur.end() ? 0 : it->second));
        }
        found.insert(std::move(b));
        return found.size() >= limit;
    };
    auto r = s.run(f);
    if (r == Search::R::Budget) {
        ++unknowns_;
        if (complete) *complete = false;
    }
    if (r == Search::R::Found && complete) *complete = false;
    return {found.begin(), found.end()};
}

std::optional<Bytes> Solver::solve_message(const std::vector<MessageStep>& steps, std::uint64_t seed,
                                           const std::string& alphabet) {
    constexpr std::size_t kCandidates = 64;
    Bytes msg;
    auto rec = [&](auto&& self, std::size_t i) -> bool {
        if (i == steps.size()) return true;
        const MessageStep& st = steps[i];
        QueryFrame fr;
        fr.history = &msg;
        fr.k = st.k;
        fr.width = st.width;
        fr.alphabet = alphabet;
        std::vector<Bytes> cands = enumerate_models(st.constraint, fr, kCandidates);
        if (seed != 0) {
            std::mt19937_64 rng(seed + i);
            std::shuffle(cands.begin(), cands.end(), rng);
        }
        for (const auto& c : cands) {
            std::size_t mark = msg.size();
            msg += c;
            if (self(self, i + 1)) return true;
            msg.resize(mark);
        }
        return false;
    };
    if (!rec(rec, 0)) return std::nullopt;
    return msg;
}

}  // namespace statelift
