#include "statelift/lang.hpp"

#include <algorithm>
#include <sstream>

namespace statelift {

namespace {

void renumber(Block& b, std::uint32_t& next) {
    for (auto& s : b) {
        if (auto* n = std::get_if<IfStmt>(&s.node)) {
            n->id = BranchId{next++};
            renumber(n->then_block, next);
            renumber(n->else_block, next);
        }
    }
}

std::string operand_text(const Operand& o) {
    switch (o.kind) {
    case Operand::Kind::Var: return o.name;
    case Operand::Kind::Int: return std::to_string(o.value);
    case Operand::Kind::EmptyStream: return "\"\"";
    }
    return "?";
}

void print_block(std::ostringstream& os, const Block& b, int depth) {
    std::string ind(static_cast<std::size_t>(depth) * 2, ' ');
    for (const auto& s : b) {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    os << ind << n.target << " = " << operand_text(n.src) << ";\n";
                } else if constexpr (std::is_same_v<T, BinaryStmt>) {
                    os << ind << n.target << " = " << operand_text(n.lhs) << ' ' << to_string(n.op) << ' '
                       << operand_text(n.rhs) << ";\n";
                } else if constexpr (std::is_same_v<T, ReadStmt>) {
                    os << ind << n.target << " = read();\n";
                } else if constexpr (std::is_same_v<T, PredStmt>) {
                    os << ind << n.target << " = " << n.pred << '(';
                    for (std::size_t i = 0; i < n.args.size(); ++i) os << (i ? ", " : "") << operand_text(n.args[i]);
                    os << ");\n";
                } else if constexpr (std::is_same_v<T, ExitStmt>) {
                    os << ind << "exit();\n";
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    os << ind << "if (" << n.cond << ") {\n";
                    print_block(os, n.then_block, depth + 1);
                    os << ind << "} else {\n";
                    print_block(os, n.else_block, depth + 1);
                    os << ind << "}\n";
                }
            },
            s.node);
    }
}

struct PathCount {
    std::uint64_t exits = 0;
    std::uint64_t cont = 1;
};

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
    return a > UINT64_MAX - b ? UINT64_MAX : a + b;
}
std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
    if (a == 0 || b == 0) return 0;
    return a > UINT64_MAX / b ? UINT64_MAX : a * b;
}

PathCount count_paths(const Block& b) {
    PathCount pc;
    for (const auto& s : b) {
        if (std::holds_alternative<ExitStmt>(s.node)) {
            pc.exits = sat_add(pc.exits, pc.cont);
            pc.cont = 0;
        } else if (const auto* n = std::get_if<IfStmt>(&s.node)) {
            PathCount t = count_paths(n->then_block);
            PathCount e = count_paths(n->else_block);
            pc.exits = sat_add(pc.exits, sat_mul(pc.cont, sat_add(t.exits, e.exits)));
            pc.cont = sat_mul(pc.cont, sat_add(t.cont, e.cont));
        }
    }
    return pc;
}

// Backward liveness over a block; `out` is live after the block.
std::set<std::string> live_in(const Block& b, std::set<std::string> live) {
    for (auto it = b.rbegin(); it != b.rend(); ++it) {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                auto use = [&](const Operand& o) {
                    if (o.kind == Operand::Kind::Var) live.insert(o.name);
                };
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    live.erase(n.target);
                    use(n.src);
                } else if constexpr (std::is_same_v<T, BinaryStmt>) {
                    live.erase(n.target);
                    use(n.lhs);
                    use(n.rhs);
                } else if constexpr (std::is_same_v<T, ReadStmt>) {
                    live.erase(n.target);
                } else if constexpr (std::is_same_v<T, PredStmt>) {
                    live.erase(n.target);
                    for (const auto& a : n.args) use(a);
                } else if constexpr (std::is_same_v<T, ExitStmt>) {
                    live.clear();
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    auto a = live_in(n.then_block, live);
                    auto c = live_in(n.else_block, live);
                    live = std::move(a);
                    live.insert(c.begin(), c.end());
                    live.insert(n.cond);
                }
            },
            it->node);
    }
    return live;
}

}  // namespace

void renumber_branches(Program& p) {
    std::uint32_t next = 0;
    renumber(p.init, next);
    renumber(p.body, next);
    p.branch_count = next;
}

std::string pretty_print(const Program& p) {
    std::ostringstream os;
    for (const auto& [name, v] : p.constants) os << "const " << name << " = " << v << ";\n";
    for (const auto& d : p.extern_preds) os << "extern pred " << d.name << '/' << d.arity << ";\n";
    os << "init {\n";
    print_block(os, p.init, 1);
    os << "}\nloop {\n";
    print_block(os, p.body, 1);
    os << "}\n";
    return os.str();
}

std::size_t count_decision_vectors(const Block& body) {
    PathCount pc = count_paths(body);
    std::uint64_t n = sat_add(pc.exits, pc.cont);
    return n > SIZE_MAX ? SIZE_MAX : static_cast<std::size_t>(n);
}

std::set<std::string> live_at_entry(const Program& p) {
    std::set<std::string> live;
    for (;;) {
        auto next = live_in(p.body, live);
        if (next == live) return live;
        live = std::move(next);
    }
}

Bytes decode_message(std::string_view text) {
    if (text.size() >= 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
        std::string_view hex = text.substr(2);
        if (hex.size() % 2 != 0) throw Error("hex message needs an even number of digits");
        Bytes out;
        for (std::size_t i = 0; i < hex.size(); i += 2) {
            auto nib = [&](char c) -> int {
                if (c >= '0' && c <= '9') return c - '0';
                if (c >= 'a' && c <= 'f') return c - 'a' + 10;
                if (c >= 'A' && c <= 'F') return c - 'A' + 10;
                throw Error(std::string("bad hex digit '") + c + "'");
            };
            out.push_back(static_cast<char>(nib(hex[i]) * 16 + nib(hex[i + 1])));
        }
        return out;
    }
    return Bytes(text);
}

std::string render_bytes(std::string_view bytes) {
    static const char* hexd = "0123456789abcdef";
    std::string out;
    for (char ch : bytes) {
        auto c = static_cast<unsigned char>(ch);
        if (c >= 0x20 && c < 0x7f && c != '\\') {
            out.push_back(static_cast<char>(c));
        } else {
            out += "\\x";
            out.push_back(hexd[c >> 4]);
            out.push_back(hexd[c & 15]);
        }
    }
    return out;
}

}  // namespace statelift
