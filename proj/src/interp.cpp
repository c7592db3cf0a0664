#include "statelift/interp.hpp"

namespace statelift {

namespace {

struct Frame {
    const Block* block;
    std::size_t idx;
};

// Forks at every If, taken arm first. Branch returns false to drop an arm.
template <class State, class Step, class BranchFn, class Done>
void walk(std::vector<Frame> stack, State st, Step& step, BranchFn& branch, Done& done) {
    for (;;) {
        while (!stack.empty() && stack.back().idx >= stack.back().block->size()) stack.pop_back();
        if (stack.empty()) {
            done(st, false);
            return;
        }
        const Stmt& s = (*stack.back().block)[stack.back().idx++];
        if (const auto* ifs = std::get_if<IfStmt>(&s.node)) {
            for (bool taken : {true, false}) {
                State next = st;
                if (!branch(next, *ifs, taken)) continue;
                auto sub = stack;
                sub.push_back({taken ? &ifs->then_block : &ifs->else_block, 0});
                walk(std::move(sub), std::move(next), step, branch, done);
            }
            return;
        }
        if (std::holds_alternative<ExitStmt>(s.node)) {
            done(st, true);
            return;
        }
        step(st, s);
    }
}

struct StaticState {
    DecisionVector path;
    std::uint32_t reads = 0;
    std::set<std::string> uses;
    std::set<std::string> assigned;

    void use(const Operand& o) {
        if (o.kind == Operand::Kind::Var && !assigned.count(o.name)) uses.insert(o.name);
    }
};

struct SymState {
    Env vals;
    std::map<std::string, std::set<std::string>> deps;
    std::uint32_t reads = 0;
    std::vector<Term> conds;
    DecisionVector path;
    BranchMap kappa;
};

Term operand_term(const Operand& o, const Env& env) {
    switch (o.kind) {
    case Operand::Kind::Int: return mk_const(o.value);
    case Operand::Kind::EmptyStream: return mk_empty_stream();
    case Operand::Kind::Var: {
        auto it = env.find(o.name);
        if (it == env.end()) throw UndefinedVariableError("variable '" + o.name + "' has no abstract value");
        return it->second;
    }
    }
    return mk_const(0);
}

std::set<std::string> operand_deps(const Operand& o, const SymState& st) {
    if (o.kind != Operand::Kind::Var) return {};
    auto it = st.deps.find(o.name);
    return it == st.deps.end() ? std::set<std::string>{} : it->second;
}

void sym_step(SymState& st, const Stmt& s) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, AssignStmt>) {
                st.vals[n.target] = operand_term(n.src, st.vals);
                st.deps[n.target] = operand_deps(n.src, st);
            } else if constexpr (std::is_same_v<T, BinaryStmt>) {
                Term a = operand_term(n.lhs, st.vals);
                Term b = operand_term(n.rhs, st.vals);
                auto d = operand_deps(n.lhs, st);
                auto e = operand_deps(n.rhs, st);
                d.insert(e.begin(), e.end());
                st.vals[n.target] = mk_bin(n.op, a, b);
                st.deps[n.target] = std::move(d);
            } else if constexpr (std::is_same_v<T, ReadStmt>) {
                st.vals[n.target] = mk_cur(st.reads++);
                st.deps[n.target] = {};
            } else if constexpr (std::is_same_v<T, PredStmt>) {
                std::vector<Term> args;
                std::set<std::string> d;
                for (const auto& a : n.args) {
                    args.push_back(operand_term(a, st.vals));
                    auto e = operand_deps(a, st);
                    d.insert(e.begin(), e.end());
                }
                st.vals[n.target] = mk_pred(n.pred, std::move(args));
                st.deps[n.target] = std::move(d);
            }
        },
        s.node);
}

}  // namespace

std::vector<VectorInfo> enumerate_vectors(const Program& p) {
    std::vector<VectorInfo> out;
    auto step = [](StaticState& st, const Stmt& s) {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    st.use(n.src);
                    st.assigned.insert(n.target);
                } else if constexpr (std::is_same_v<T, BinaryStmt>) {
                    st.use(n.lhs);
                    st.use(n.rhs);
                    st.assigned.insert(n.target);
                } else if constexpr (std::is_same_v<T, ReadStmt>) {
                    ++st.reads;
                    st.assigned.insert(n.target);
                } else if constexpr (std::is_same_v<T, PredStmt>) {
                    for (const auto& a : n.args) st.use(a);
                    st.assigned.insert(n.target);
                }
            },
            s.node);
    };
    auto branch = [](StaticState& st, const IfStmt& ifs, bool taken) {
        st.use(Operand::var(ifs.cond));
        st.path.emplace_back(ifs.id, taken);
        return true;
    };
    auto done = [&](StaticState& st, bool exiting) {
        out.push_back({st.path, st.reads, exiting, st.uses, st.assigned});
    };
    walk(std::vector<Frame>{{&p.body, 0}}, StaticState{}, step, branch, done);
    return out;
}

Env init_env(const Program& p) {
    SymState st;
    for (const auto& s : p.init) sym_step(st, s);
    return st.vals;
}

Env advance_frame(const Env& env, std::uint32_t width) {
    Env out;
    for (const auto& [k, v] : env) out[k] = advance_term(v, width);
    return out;
}

Env restrict_env(const Env& env, const std::set<std::string>& vars) {
    Env out;
    for (const auto& [k, v] : env)
        if (vars.count(k)) out[k] = v;
    return out;
}

bool env_equal(const Env& a, const Env& b) {
    if (a.size() != b.size()) return false;
    for (auto i = a.begin(), j = b.begin(); i != a.end(); ++i, ++j)
        if (i->first != j->first || !term_equal(i->second, j->second)) return false;
    return true;
}

std::string print_env(const Env& env, const PrintOptions& opts) {
    std::string s = "{";
    bool first = true;
    for (const auto& [k, v] : env) {
        if (!first) s += ", ";
        first = false;
        s += k + " = " + print_term(v, opts);
    }
    return s + "}";
}

IterationResult abstract_iteration(const Program& p, const std::vector<VectorInfo>& vectors, const Env& entry,
                                   const Term& ctx, const std::set<std::size_t>* allowed, Solver& solver) {
    IterationResult res;
    std::map<DecisionVector, std::size_t> index;
    for (std::size_t i = 0; i < vectors.size(); ++i) index[vectors[i].path] = i;
    std::set<DecisionVector> prefixes;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (allowed && !allowed->count(i)) continue;
        const auto& path = vectors[i].path;
        for (std::size_t n = 1; n <= path.size(); ++n) prefixes.emplace(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(n));
    }

    auto branch = [&](SymState& st, const IfStmt& ifs, bool taken) {
        st.path.emplace_back(ifs.id, taken);
        if (!prefixes.count(st.path)) return false;
        Term c = mk_truth(operand_term(Operand::var(ifs.cond), st.vals));
        st.kappa[ifs.id] = c;
        Term lit = taken ? c : mk_not(c);
        if (is_false(lit)) {
            ++res.pruned;
            return false;
        }
        if (is_true(lit)) return true;
        st.conds.push_back(lit);
        if (solver.check(mk_and(ctx, mk_and(st.conds))).unsat()) {
            ++res.pruned;
            return false;
        }
        return true;
    };
    auto done = [&](SymState& st, bool exiting) {
        auto it = index.find(st.path);
        if (it == index.end()) throw Error("internal: path missing from the vector table");
        if (allowed && !allowed->count(it->second)) return;
        VectorResult r;
        r.vector = it->second;
        r.phi = mk_and(st.conds);
        r.out = st.vals;
        r.exiting = exiting;
        r.reads = st.reads;
        r.kappa = st.kappa;
        r.deps = st.deps;
        for (const auto& [var, v] : entry) {
            auto d = st.deps.find(var);
            if (d == st.deps.end() || !d->second.count(var)) continue;
            if (is_stream(v) || term_info(v).has_prev) r.recursive.insert(var);
        }
        res.vectors.push_back(std::move(r));
    };
    auto step = [](SymState& st, const Stmt& s) { sym_step(st, s); };

    SymState st;
    st.vals = entry;
    for (const auto& [var, v] : entry) st.deps[var] = {var};
    walk(std::vector<Frame>{{&p.body, 0}}, std::move(st), step, branch, done);
    return res;
}

std::set<std::string> relevant_vars(const Program& p, const std::vector<VectorInfo>& vectors,
                                    const std::set<std::size_t>& group) {
    std::set<std::string> live = live_at_entry(p);
    std::set<std::string> out;
    for (auto i : group) {
        const auto& v = vectors[i];
        out.insert(v.uses.begin(), v.uses.end());
        if (v.exiting) continue;
        for (const auto& x : live)
            if (!v.assigned.count(x)) out.insert(x);
    }
    return out;
}

}  // namespace statelift
