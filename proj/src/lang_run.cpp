#include "statelift/lang.hpp"

namespace statelift {

namespace {

enum class Flow { Normal, Exited, OutOfInput };

class Machine {
public:
    Machine(const Program& p, const PredMap& preds, ConcreteState& st, std::string_view msg)
        : preds_(preds), st_(st), msg_(msg) {
        (void)p;
    }

    Flow run(const Block& b, StepResult* trace) {
        for (const auto& s : b) {
            Flow f = exec(s, trace);
            if (f != Flow::Normal) return f;
        }
        return Flow::Normal;
    }

private:
    Value operand(const Operand& o) const {
        switch (o.kind) {
        case Operand::Kind::Int: return o.value;
        case Operand::Kind::EmptyStream: return Bytes{};
        case Operand::Kind::Var: {
            auto it = st_.vars.find(o.name);
            if (it == st_.vars.end()) throw UndefinedVariableError("variable '" + o.name + "' is unassigned");
            return it->second;
        }
        }
        return 0u;
    }

    static std::uint32_t as_int(const Value& v, std::string_view ctx) {
        if (const auto* i = std::get_if<std::uint32_t>(&v)) return *i;
        throw TypeError("stream value used as integer in " + std::string(ctx));
    }

    Flow exec(const Stmt& s, StepResult* trace) {
        return std::visit(
            [&](const auto& n) -> Flow {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    st_.vars[n.target] = operand(n.src);
                } else if constexpr (std::is_same_v<T, BinaryStmt>) {
                    Value a = operand(n.lhs);
                    Value b = operand(n.rhs);
                    if (n.op == BinOp::Append) {
                        auto* sa = std::get_if<Bytes>(&a);
                        if (!sa) throw TypeError("'++' needs a stream on the left");
                        Bytes out = *sa;
                        if (const auto* sb = std::get_if<Bytes>(&b))
                            out += *sb;
                        else
                            out.push_back(static_cast<char>(std::get<std::uint32_t>(b) & 0xffu));
                        st_.vars[n.target] = std::move(out);
                    } else {
                        st_.vars[n.target] = apply_u32(n.op, as_int(a, to_string(n.op)), as_int(b, to_string(n.op)));
                    }
                } else if constexpr (std::is_same_v<T, ReadStmt>) {
                    if (st_.pos >= msg_.size()) return Flow::OutOfInput;
                    st_.vars[n.target] = static_cast<std::uint32_t>(static_cast<unsigned char>(msg_[st_.pos++]));
                    if (trace) ++trace->reads;
                } else if constexpr (std::is_same_v<T, PredStmt>) {
                    auto it = preds_.find(n.pred);
                    if (it == preds_.end() || !it->second)
                        throw MissingPredicateImpl("no implementation for predicate '" + n.pred + "'");
                    std::vector<Value> args;
                    args.reserve(n.args.size());
                    for (const auto& a : n.args) args.push_back(operand(a));
                    st_.vars[n.target] = it->second(args) ? 1u : 0u;
                } else if constexpr (std::is_same_v<T, ExitStmt>) {
                    return Flow::Exited;
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    bool taken = as_int(operand(Operand::var(n.cond)), "branch condition") != 0;
                    if (trace) trace->path.emplace_back(n.id, taken);
                    return run(taken ? n.then_block : n.else_block, trace);
                }
                return Flow::Normal;
            },
            s.node);
    }

    const PredMap& preds_;
    ConcreteState& st_;
    std::string_view msg_;
};

void require_impls(const Program& p, const PredMap& preds) {
    for (const auto& d : p.extern_preds) {
        auto it = preds.find(d.name);
        if (it == preds.end() || !it->second)
            throw MissingPredicateImpl("no implementation for predicate '" + d.name + "'");
    }
}

}  // namespace

ConcreteState initial_state(const Program& p, const PredMap& preds) {
    ConcreteState st;
    Machine m(p, preds, st, {});
    m.run(p.init, nullptr);
    return st;
}

StepResult step(const Program& p, ConcreteState& st, std::string_view msg, const PredMap& preds) {
    StepResult r;
    Machine m(p, preds, st, msg);
    switch (m.run(p.body, &r)) {
    case Flow::Normal: r.outcome = StepOutcome::Continue; break;
    case Flow::Exited: r.outcome = StepOutcome::Exit; break;
    case Flow::OutOfInput: r.outcome = StepOutcome::OutOfInput; break;
    }
    return r;
}

RunResult concrete_run(const Program& p, std::string_view msg, const PredMap& preds, RunOptions opts) {
    require_impls(p, preds);
    RunResult res;
    ConcreteState st = initial_state(p, preds);
    const std::size_t limit = static_cast<std::size_t>(opts.guard) * (msg.size() + 2);
    for (std::size_t it = 0; it < limit; ++it) {
        StepResult r = step(p, st, msg, preds);
        res.iteration_paths.push_back(std::move(r.path));
        res.bytes_consumed = st.pos;
        if (r.outcome == StepOutcome::Exit) {
            res.accepted = st.pos == msg.size();
            return res;
        }
        if (r.outcome == StepOutcome::OutOfInput) return res;
    }
    res.nonterminating = true;
    return res;
}

std::set<Bytes> enumerate_accepted(const Program& p, std::string_view alphabet, std::size_t max_len,
                                   const PredMap& preds, std::size_t budget) {
    std::set<char> uniq(alphabet.begin(), alphabet.end());
    std::vector<char> syms(uniq.begin(), uniq.end());
    std::size_t total = 0;
    std::size_t layer = 1;
    for (std::size_t len = 0; len <= max_len; ++len) {
        total += layer;
        if (total > budget) throw BudgetExceeded("enumeration exceeds budget of " + std::to_string(budget));
        if (len < max_len) {
            if (!syms.empty() && layer > budget / syms.size())
                throw BudgetExceeded("enumeration exceeds budget of " + std::to_string(budget));
            layer *= syms.size();
        }
    }
    std::set<Bytes> out;
    Bytes cur;
    auto rec = [&](auto&& self, std::size_t len) -> void {
        if (concrete_run(p, cur, preds).accepted) out.insert(cur);
        if (len == max_len) return;
        for (char c : syms) {
            cur.push_back(c);
            self(self, len + 1);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    return out;
}

}  // namespace statelift
