#include "statelift/lang.hpp"

#include <cctype>
#include <optional>
#include <sstream>

namespace statelift {

SyntaxError::SyntaxError(std::size_t line, std::size_t column, const std::string& what)
    : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

bool IfStmt::operator==(const IfStmt& o) const {
    return id == o.id && cond == o.cond && then_block == o.then_block && else_block == o.else_block;
}

std::string_view to_string(BinOp op) {
    switch (op) {
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Gt: return ">";
    case BinOp::Lt: return "<";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Ge: return ">=";
    case BinOp::Le: return "<=";
    case BinOp::Mul: return "*";
    case BinOp::Mod: return "%";
    case BinOp::Shl: return "<<";
    case BinOp::Shr: return ">>";
    case BinOp::Append: return "++";
    }
    return "?";
}

bool is_comparison(BinOp op) {
    switch (op) {
    case BinOp::Gt:
    case BinOp::Lt:
    case BinOp::Eq:
    case BinOp::Ne:
    case BinOp::Ge:
    case BinOp::Le: return true;
    default: return false;
    }
}

std::uint32_t apply_u32(BinOp op, std::uint32_t a, std::uint32_t b) {
    switch (op) {
    case BinOp::And: return (a != 0 && b != 0) ? 1u : 0u;
    case BinOp::Or: return (a != 0 || b != 0) ? 1u : 0u;
    case BinOp::Add: return a + b;
    case BinOp::Sub: return a - b;
    case BinOp::Gt: return a > b;
    case BinOp::Lt: return a < b;
    case BinOp::Eq: return a == b;
    case BinOp::Ne: return a != b;
    case BinOp::Ge: return a >= b;
    case BinOp::Le: return a <= b;
    case BinOp::Mul: return a * b;
    case BinOp::Mod: return b == 0 ? a : a % b;
    case BinOp::Shl: return a << (b & 31u);
    case BinOp::Shr: return a >> (b & 31u);
    case BinOp::Append: throw TypeError("'++' needs a stream operand");
    }
    return 0;
}

namespace {

enum class Tok { Ident, Int, Str, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::uint32_t value = 0;
    std::size_t line = 1;
    std::size_t col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.line = line_;
            t.col = col_;
            if (pos_ >= src_.size()) {
                out.push_back(t);
                return out;
            }
            char c = src_[pos_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                t.kind = Tok::Ident;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                    t.text += advance();
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                t.kind = Tok::Int;
                t.value = lex_int(t);
            } else if (c == '\'') {
                t.kind = Tok::Int;
                advance();
                t.value = lex_char_body('\'', t);
                if (pos_ >= src_.size() || src_[pos_] != '\'')
                    throw SyntaxError(t.line, t.col, "unterminated character literal");
                advance();
            } else if (c == '"') {
                t.kind = Tok::Str;
                advance();
                while (pos_ < src_.size() && src_[pos_] != '"') {
                    t.text += static_cast<char>(lex_char_body('"', t));
                }
                if (pos_ >= src_.size()) throw SyntaxError(t.line, t.col, "unterminated string literal");
                advance();
            } else {
                t.kind = Tok::Punct;
                static const char* two[] = {"&&", "||", "==", "!=", ">=", "<=", "<<", ">>", "++"};
                bool matched = false;
                for (const char* p : two) {
                    if (src_.substr(pos_, 2) == p) {
                        t.text = p;
                        advance();
                        advance();
                        matched = true;
                        break;
                    }
                }
                if (!matched) {
                    static const std::string_view single = "{}()=;:,/<>+-*%!";
                    if (single.find(c) == std::string_view::npos)
                        throw SyntaxError(line_, col_, std::string("unexpected character '") + c + "'");
                    t.text = std::string(1, advance());
                }
            }
            out.push_back(std::move(t));
        }
    }

private:
    char advance() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (src_.substr(pos_, 2) == "//") {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (src_.substr(pos_, 2) == "/*") {
                std::size_t l = line_, cl = col_;
                advance();
                advance();
                while (pos_ < src_.size() && src_.substr(pos_, 2) != "*/") advance();
                if (pos_ >= src_.size()) throw SyntaxError(l, cl, "unterminated comment");
                advance();
                advance();
            } else {
                break;
            }
        }
    }

    std::uint32_t lex_int(const Token& t) {
        std::uint64_t v = 0;
        int base = 10;
        if (src_.substr(pos_, 2) == "0x" || src_.substr(pos_, 2) == "0X") {
            base = 16;
            advance();
            advance();
        }
        bool any = false;
        while (pos_ < src_.size() && std::isxdigit(static_cast<unsigned char>(src_[pos_]))) {
            char c = src_[pos_];
            int d = std::isdigit(static_cast<unsigned char>(c)) ? c - '0' : std::tolower(c) - 'a' + 10;
            if (d >= base) break;
            v = v * base + d;
            if (v > 0xffffffffull) throw SyntaxError(t.line, t.col, "integer literal exceeds 32 bits");
            advance();
            any = true;
        }
        if (!any) throw SyntaxError(t.line, t.col, "malformed integer literal");
        if (pos_ < src_.size() &&
            (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            throw SyntaxError(t.line, t.col, "malformed integer literal");
        return static_cast<std::uint32_t>(v);
    }

    std::uint32_t lex_char_body(char quote, const Token& t) {
        if (pos_ >= src_.size() || src_[pos_] == '\n') throw SyntaxError(t.line, t.col, "unterminated literal");
        char c = advance();
        if (c == quote) throw SyntaxError(t.line, t.col, "empty character literal");
        if (c != '\\') return static_cast<unsigned char>(c);
        if (pos_ >= src_.size()) throw SyntaxError(t.line, t.col, "bad escape");
        char e = advance();
        switch (e) {
        case 'n': return '\n';
        case 't': return '\t';
        case 'r': return '\r';
        case '0': return 0;
        case '\\': return '\\';
        case '\'': return '\'';
        case '"': return '"';
        case 'x': {
            std::uint32_t v = 0;
            for (int i = 0; i < 2; ++i) {
                if (pos_ >= src_.size() || !std::isxdigit(static_cast<unsigned char>(src_[pos_])))
                    throw SyntaxError(t.line, t.col, "bad \\x escape");
                char h = advance();
                v = v * 16 + (std::isdigit(static_cast<unsigned char>(h)) ? h - '0' : std::tolower(h) - 'a' + 10);
            }
            return v;
        }
        default: throw SyntaxError(t.line, t.col, std::string("unknown escape \\") + e);
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

std::optional<BinOp> binop_of(const std::string& s) {
    static const std::map<std::string, BinOp> ops = {
        {"&&", BinOp::And}, {"||", BinOp::Or},  {"+", BinOp::Add},  {"-", BinOp::Sub},
        {">", BinOp::Gt},   {"<", BinOp::Lt},   {"==", BinOp::Eq},  {"!=", BinOp::Ne},
        {">=", BinOp::Ge},  {"<=", BinOp::Le},  {"*", BinOp::Mul},  {"%", BinOp::Mod},
        {"<<", BinOp::Shl}, {">>", BinOp::Shr}, {"++", BinOp::Append}};
    auto it = ops.find(s);
    if (it == ops.end()) return std::nullopt;
    return it->second;
}

const std::set<std::string>& keywords() {
    static const std::set<std::string> kw = {"const", "extern", "pred",  "init",   "loop", "do",
                                             "while", "for",    "if",    "else",   "switch",
                                             "case",  "default", "break", "exit",  "read"};
    return kw;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {
        for (const auto& t : toks_)
            if (t.kind == Tok::Ident) idents_.insert(t.text);
    }

    Program parse() {
        bool have_init = false;
        bool have_loop = false;
        while (peek().kind != Tok::End) {
            const Token& t = peek();
            if (is_ident("const")) {
                next();
                Token name = expect_ident();
                expect("=");
                Token v = next();
                if (v.kind != Tok::Int) throw SyntaxError(v.line, v.col, "constant value must be an integer");
                expect(";");
                if (prog_.constants.count(name.text))
                    throw DuplicateConstError("duplicate constant '" + name.text + "' at " +
                                              std::to_string(name.line) + ":" + std::to_string(name.col));
                prog_.constants[name.text] = v.value;
            } else if (is_ident("extern")) {
                next();
                if (!is_ident("pred")) throw SyntaxError(peek().line, peek().col, "expected 'pred'");
                next();
                Token name = expect_ident();
                expect("/");
                Token ar = next();
                if (ar.kind != Tok::Int) throw SyntaxError(ar.line, ar.col, "expected arity");
                expect(";");
                for (const auto& d : prog_.extern_preds)
                    if (d.name == name.text)
                        throw SyntaxError(name.line, name.col, "duplicate predicate '" + name.text + "'");
                prog_.extern_preds.push_back({name.text, ar.value});
            } else if (is_ident("init")) {
                if (have_init) throw SyntaxError(t.line, t.col, "duplicate init section");
                if (have_loop) throw SyntaxError(t.line, t.col, "init section must precede the loop");
                have_init = true;
                next();
                in_init_ = true;
                prog_.init = parse_braced();
                in_init_ = false;
            } else if (is_ident("loop") || is_ident("do")) {
                if (have_loop) throw NestedLoopError(where(t) + "more than one parsing loop");
                have_loop = true;
                bool do_form = is_ident("do");
                next();
                prog_.body = parse_braced();
                if (do_form) {
                    if (!is_ident("while")) throw SyntaxError(peek().line, peek().col, "expected 'while'");
                    next();
                    expect("(");
                    Token one = next();
                    if (one.kind != Tok::Int || one.value == 0)
                        throw SyntaxError(one.line, one.col, "parsing loop condition must be a nonzero constant");
                    expect(")");
                    if (is_punct(";")) next();
                }
            } else {
                throw SyntaxError(t.line, t.col, "expected 'const', 'extern', 'init' or 'loop'");
            }
        }
        if (!have_loop) throw SyntaxError(peek().line, peek().col, "program has no parsing loop");
        prog_.branch_count = next_branch_;
        return std::move(prog_);
    }

private:
    static std::string where(const Token& t) {
        return std::to_string(t.line) + ":" + std::to_string(t.col) + ": ";
    }

    const Token& peek(std::size_t ahead = 0) const {
        std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }
    Token next() {
        Token t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    bool is_ident(std::string_view s) const { return peek().kind == Tok::Ident && peek().text == s; }
    bool is_punct(std::string_view s) const { return peek().kind == Tok::Punct && peek().text == s; }
    void expect(std::string_view s) {
        if (!is_punct(s))
            throw SyntaxError(peek().line, peek().col,
                              "expected '" + std::string(s) + "', found '" + describe(peek()) + "'");
        next();
    }
    static std::string describe(const Token& t) {
        switch (t.kind) {
        case Tok::End: return "end of input";
        case Tok::Int: return std::to_string(t.value);
        default: return t.text;
        }
    }
    Token expect_ident() {
        const Token& t = peek();
        if (t.kind != Tok::Ident || keywords().count(t.text))
            throw SyntaxError(t.line, t.col, "expected identifier, found '" + describe(t) + "'");
        return next();
    }

    std::string fresh_temp() {
        for (;;) {
            std::string name = "__c" + std::to_string(temp_counter_++);
            if (!idents_.count(name)) {
                idents_.insert(name);
                return name;
            }
        }
    }

    BranchId new_branch() { return BranchId{next_branch_++}; }

    Block parse_braced() {
        expect("{");
        Block b;
        while (!is_punct("}")) {
            if (peek().kind == Tok::End) throw SyntaxError(peek().line, peek().col, "unexpected end of input");
            parse_stmt(b);
        }
        next();
        return b;
    }

    Block parse_body() {
        if (is_punct("{")) return parse_braced();
        Block b;
        parse_stmt(b);
        return b;
    }

    Operand parse_operand() {
        Token t = next();
        if (t.kind == Tok::Int) return Operand::lit(t.value);
        if (t.kind == Tok::Str) {
            if (!t.text.empty()) throw SyntaxError(t.line, t.col, "only the empty string literal is supported");
            return Operand::empty_stream();
        }
        if (t.kind == Tok::Ident && !keywords().count(t.text)) {
            auto c = prog_.constants.find(t.text);
            if (c != prog_.constants.end()) return Operand::lit(c->second);
            return Operand::var(t.text);
        }
        throw SyntaxError(t.line, t.col, "expected operand, found '" + describe(t) + "'");
    }

    void check_target(const Token& t) {
        if (prog_.constants.count(t.text))
            throw SyntaxError(t.line, t.col, "cannot assign to constant '" + t.text + "'");
        for (const auto& d : prog_.extern_preds)
            if (d.name == t.text) throw SyntaxError(t.line, t.col, "cannot assign to predicate '" + t.text + "'");
    }

    const PredDecl* find_pred(const std::string& n) const {
        for (const auto& d : prog_.extern_preds)
            if (d.name == n) return &d;
        return nullptr;
    }

    // Emits statements computing a condition into a variable, returns its name.
    std::string parse_condition(Block& out) {
        if (is_punct("!")) {
            next();
            Operand a = parse_operand();
            std::string tmp = fresh_temp();
            out.push_back(Stmt{BinaryStmt{tmp, a, BinOp::Eq, Operand::lit(0)}});
            return tmp;
        }
        Operand a = parse_operand();
        if (is_punct(")")) {
            if (a.kind == Operand::Kind::Var) return a.name;
            std::string tmp = fresh_temp();
            out.push_back(Stmt{AssignStmt{tmp, a}});
            return tmp;
        }
        const Token& opt = peek();
        auto op = opt.kind == Tok::Punct ? binop_of(opt.text) : std::nullopt;
        if (!op) throw SyntaxError(opt.line, opt.col, "expected operator or ')' in condition");
        next();
        Operand b = parse_operand();
        std::string tmp = fresh_temp();
        out.push_back(Stmt{BinaryStmt{tmp, a, *op, b}});
        return tmp;
    }

    void parse_if(Block& out) {
        next();  // if
        expect("(");
        std::string cond = parse_condition(out);
        expect(")");
        IfStmt s;
        s.id = new_branch();
        s.cond = cond;
        s.then_block = parse_body();
        if (is_ident("else")) {
            next();
            if (is_ident("if")) {
                parse_if(s.else_block);
            } else {
                s.else_block = parse_body();
            }
        }
        out.push_back(Stmt{std::move(s)});
    }

    struct Case {
        std::vector<Operand> labels;
        bool is_default = false;
        Block body;
        Token at;
    };

    void parse_switch(Block& out) {
        next();  // switch
        expect("(");
        Operand scrut = parse_operand();
        expect(")");
        expect("{");
        std::vector<Case> cases;
        bool have_default = false;
        while (!is_punct("}")) {
            Case c;
            c.at = peek();
            if (!is_ident("case") && !is_ident("default"))
                throw SyntaxError(peek().line, peek().col, "expected 'case' or 'default'");
            while (is_ident("case") || is_ident("default")) {
                if (is_ident("default")) {
                    if (have_default) throw SyntaxError(peek().line, peek().col, "duplicate default");
                    have_default = true;
                    c.is_default = true;
                    next();
                    expect(":");
                } else {
                    next();
                    Operand lbl = parse_operand();
                    if (lbl.kind != Operand::Kind::Int)
                        throw SyntaxError(c.at.line, c.at.col, "case label must be a constant");
                    expect(":");
                    c.labels.push_back(lbl);
                }
            }
            bool terminated = false;
            while (!is_ident("case") && !is_ident("default") && !is_punct("}")) {
                if (peek().kind == Tok::End) throw SyntaxError(peek().line, peek().col, "unexpected end of input");
                if (is_ident("break")) {
                    next();
                    expect(";");
                    terminated = true;
                    break;
                }
                parse_stmt(c.body);
            }
            if (terminated) {
                if (!is_ident("case") && !is_ident("default") && !is_punct("}"))
                    throw SyntaxError(peek().line, peek().col, "statement after 'break'");
            } else if (!is_punct("}")) {
                bool ends_exit = !c.body.empty() && std::holds_alternative<ExitStmt>(c.body.back().node);
                if (!ends_exit) throw SyntaxError(c.at.line, c.at.col, "case fallthrough is not supported");
            }
            cases.push_back(std::move(c));
        }
        next();

        // the default arm runs when no label matches, wherever it appears
        Block default_body;
        std::vector<const Case*> labelled;
        for (const auto& c : cases) {
            if (c.is_default) {
                default_body = c.body;
                if (!c.labels.empty())
                    throw SyntaxError(c.at.line, c.at.col, "case labels sharing a default arm are not supported");
            } else {
                labelled.push_back(&c);
            }
        }
        emit_case_chain(out, scrut, labelled, 0, default_body);
    }

    void emit_case_chain(Block& out, const Operand& scrut, const std::vector<const Case*>& cases,
                         std::size_t i, const Block& default_body) {
        if (i == cases.size()) {
            out.insert(out.end(), default_body.begin(), default_body.end());
            return;
        }
        const Case& c = *cases[i];
        std::string cond;
        for (const auto& lbl : c.labels) {
            std::string t = fresh_temp();
            out.push_back(Stmt{BinaryStmt{t, scrut, BinOp::Eq, lbl}});
            if (cond.empty()) {
                cond = t;
            } else {
                std::string u = fresh_temp();
                out.push_back(Stmt{BinaryStmt{u, Operand::var(cond), BinOp::Or, Operand::var(t)}});
                cond = u;
            }
        }
        IfStmt s;
        s.id = new_branch();
        s.cond = cond;
        s.then_block = c.body;
        emit_case_chain(s.else_block, scrut, cases, i + 1, default_body);
        out.push_back(Stmt{std::move(s)});
    }

    void parse_stmt(Block& out) {
        const Token& t = peek();
        if (t.kind == Tok::Punct && t.text == ";") {
            next();
            return;
        }
        if (t.kind == Tok::Punct && t.text == "{") {
            Block inner = parse_braced();
            out.insert(out.end(), inner.begin(), inner.end());
            return;
        }
        if (t.kind != Tok::Ident) throw SyntaxError(t.line, t.col, "expected statement, found '" + describe(t) + "'");
        if (t.text == "do" || t.text == "while" || t.text == "for")
            throw NestedLoopError(where(t) + "nested loops are not supported");
        if (t.text == "if") {
            parse_if(out);
            return;
        }
        if (t.text == "switch") {
            parse_switch(out);
            return;
        }
        if (t.text == "exit") {
            if (in_init_) throw SyntaxError(t.line, t.col, "exit() is only allowed inside the loop");
            next();
            expect("(");
            expect(")");
            expect(";");
            out.push_back(Stmt{ExitStmt{}});
            return;
        }
        if (t.text == "break") throw SyntaxError(t.line, t.col, "'break' outside switch");
        Token target = expect_ident();
        check_target(target);
        expect("=");
        if (is_ident("read")) {
            Token r = next();
            if (in_init_) throw SyntaxError(r.line, r.col, "read() is only allowed inside the loop");
            expect("(");
            expect(")");
            expect(";");
            out.push_back(Stmt{ReadStmt{target.text}});
            return;
        }
        if (peek().kind == Tok::Ident && peek(1).kind == Tok::Punct && peek(1).text == "(") {
            Token pname = next();
            const PredDecl* d = find_pred(pname.text);
            if (!d) throw SyntaxError(pname.line, pname.col, "call to undeclared predicate '" + pname.text + "'");
            expect("(");
            std::vector<Operand> args;
            if (!is_punct(")")) {
                args.push_back(parse_operand());
                while (is_punct(",")) {
                    next();
                    args.push_back(parse_operand());
                }
            }
            expect(")");
            expect(";");
            if (args.size() != d->arity)
                throw SyntaxError(pname.line, pname.col, "predicate '" + pname.text + "' expects " +
                                                            std::to_string(d->arity) + " argument(s)");
            out.push_back(Stmt{PredStmt{target.text, pname.text, std::move(args)}});
            return;
        }
        if (is_punct("!")) {
            next();
            Operand a = parse_operand();
            expect(";");
            out.push_back(Stmt{BinaryStmt{target.text, a, BinOp::Eq, Operand::lit(0)}});
            return;
        }
        Operand a = parse_operand();
        if (is_punct(";")) {
            next();
            out.push_back(Stmt{AssignStmt{target.text, a}});
            return;
        }
        const Token& opt = peek();
        auto op = opt.kind == Tok::Punct ? binop_of(opt.text) : std::nullopt;
        if (!op) throw SyntaxError(opt.line, opt.col, "expected operator or ';'");
        next();
        Operand b = parse_operand();
        expect(";");
        out.push_back(Stmt{BinaryStmt{target.text, a, *op, b}});
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    Program prog_;
    std::set<std::string> idents_;
    std::uint32_t next_branch_ = 0;
    std::uint32_t temp_counter_ = 0;
    bool in_init_ = false;
};

// Definite assignment: returns the defined set after the block, or nullopt when
// every path exits.
using DefSet = std::optional<std::set<std::string>>;

void use(const Operand& o, const std::set<std::string>& defined) {
    if (o.kind == Operand::Kind::Var && !defined.count(o.name))
        throw UndefinedVariableError("variable '" + o.name + "' may be used before assignment");
}

DefSet check_block(const Block& b, std::set<std::string> defined) {
    for (const auto& s : b) {
        DefSet next = std::visit(
            [&](const auto& n) -> DefSet {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    use(n.src, defined);
                    defined.insert(n.target);
                } else if constexpr (std::is_same_v<T, BinaryStmt>) {
                    use(n.lhs, defined);
                    use(n.rhs, defined);
                    defined.insert(n.target);
                } else if constexpr (std::is_same_v<T, ReadStmt>) {
                    defined.insert(n.target);
                } else if constexpr (std::is_same_v<T, PredStmt>) {
                    for (const auto& a : n.args) use(a, defined);
                    defined.insert(n.target);
                } else if constexpr (std::is_same_v<T, ExitStmt>) {
                    return std::nullopt;
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    use(Operand::var(n.cond), defined);
                    DefSet a = check_block(n.then_block, defined);
                    DefSet c = check_block(n.else_block, defined);
                    if (!a) return c;
                    if (!c) return a;
                    std::set<std::string> both;
                    for (const auto& v : *a)
                        if (c->count(v)) both.insert(v);
                    return both;
                }
                return defined;
            },
            s.node);
        if (!next) return std::nullopt;
        defined = std::move(*next);
    }
    return defined;
}

}  // namespace

Program parse_program(std::string_view text) {
    Lexer lx(text);
    Parser ps(lx.run());
    Program p = ps.parse();
    renumber_branches(p);
    DefSet after_init = check_block(p.init, {});
    check_block(p.body, after_init ? *after_init : std::set<std::string>{});
    return p;
}

}  // namespace statelift
