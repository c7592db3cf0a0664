#include "statelift/term.hpp"

#include <cctype>

namespace statelift {

namespace {

int precedence(BinOp op) {
    switch (op) {
    case BinOp::Or: return 1;
    case BinOp::And: return 2;
    case BinOp::Eq:
    case BinOp::Ne:
    case BinOp::Lt:
    case BinOp::Gt:
    case BinOp::Le:
    case BinOp::Ge: return 3;
    case BinOp::Shl:
    case BinOp::Shr: return 4;
    case BinOp::Add:
    case BinOp::Sub: return 5;
    case BinOp::Mul:
    case BinOp::Mod: return 6;
    case BinOp::Append: return 0;
    }
    return 0;
}

constexpr int kAtom = 10;

bool is_byte_ref(const Term& t) { return t->kind == Kind::Cur || t->kind == Kind::Prev; }

bool affine_greater(Affine x, Affine y) {
    if (x.a != y.a) return x.a > y.a;
    if (x.b != y.b) return x.b > y.b;
    return x.kid > y.kid;
}

void collect_far(const Term& t, std::optional<Affine>& m) {
    auto note = [&](Affine d) {
        if (!m || affine_greater(d, *m)) m = d;
    };
    if (t->kind == Kind::Prev) note(t->aff);
    for (const auto& s : t->segs) {
        if (s.kind == Segment::Kind::Prev) note(s.far);
        if (s.byte) collect_far(s.byte, m);
    }
    for (const auto& k : t->kids) collect_far(k, m);
}

class Printer {
public:
    Printer(const PrintOptions& o, const Term& root) : opts_(o) { collect_far(root, far_); }

    std::string expr(const Term& t, int need) {
        int p = kAtom;
        std::string s = render(t, p);
        if (p < need) return "(" + s + ")";
        return s;
    }

private:
    std::string kvar(std::uint32_t kid) const { return opts_.plain_k ? "k" : "k" + std::to_string(kid); }

    std::string affine(Affine x) const {
        auto signed_const = [](std::uint32_t b) {
            if (b >= 0x80000000u) return "-" + std::to_string(0u - b);
            return std::to_string(b);
        };
        if (x.is_const()) return signed_const(x.b);
        std::string s;
        if (x.a == 0xffffffffu) {
            s = "-" + kvar(x.kid);
        } else if (x.a != 1) {
            s = signed_const(x.a) + "*" + kvar(x.kid);
        } else {
            s = kvar(x.kid);
        }
        if (x.b == 0) return s;
        if (x.b >= 0x80000000u) return s + "-" + std::to_string(0u - x.b);
        return s + "+" + std::to_string(x.b);
    }

    std::string lit(std::uint32_t v, bool as_char) const {
        if (as_char && v >= 0x20 && v < 0x7f) {
            char c = static_cast<char>(v);
            if (c == '\'' || c == '\\') return std::string("'\\") + c + "'";
            return std::string("'") + c + "'";
        }
        return std::to_string(v);
    }

    std::string window_prev(Affine far, Affine near) const {
        Affine m = far_.value_or(far);
        auto a = affine_sub(m, far);
        auto b = affine_sub(m, near);
        if (!a || !b) {
            m = far;
            a = Affine::constant(0);
            b = affine_sub(far, near);
            if (!b) throw Error("lookback window mixes induction variables");
        }
        if (a->is_const() && a->b == 0 && near.is_const() && near.b == 0) return "t[" + affine(m) + "]";
        return "t[" + affine(m) + "," + affine(*a) + ":" + affine(*b) + "]";
    }

    std::string segment(const Segment& s) {
        switch (s.kind) {
        case Segment::Kind::Cur:
            return "s[" + std::to_string(opts_.width) + "," + std::to_string(s.lo) + ":" + std::to_string(s.hi) + "]";
        case Segment::Kind::Prev: return window_prev(s.far, s.near);
        case Segment::Kind::Byte: return "byte(" + expr(s.byte, 0) + ")";
        case Segment::Kind::Top: return "top#" + s.tag;
        }
        return {};
    }

    std::string operand(const Term& t, const Term& other, int need) {
        std::uint32_t v = 0;
        if (is_const(t, &v) && is_byte_ref(other)) return lit(v, true);
        return expr(t, need);
    }

    std::string render(const Term& t, int& p) {
        p = kAtom;
        switch (t->kind) {
        case Kind::Const: return std::to_string(t->value);
        case Kind::Affine: {
            std::string s = affine(t->aff);
            if (s.find_first_of("+-*") != std::string::npos) p = 5;
            return s;
        }
        case Kind::Cur: return "s[" + std::to_string(opts_.width) + "," + std::to_string(t->value) + "]";
        case Kind::Prev: {
            Affine m = far_.value_or(t->aff);
            auto idx = affine_sub(m, t->aff);
            if (!idx) {
                m = t->aff;
                idx = Affine::constant(0);
            }
            return "t[" + affine(m) + "," + affine(*idx) + "]";
        }
        case Kind::Interval: {
            std::string lo = t->lo_inf ? "-inf" : std::to_string(t->lo);
            std::string hi = t->hi_inf ? "+inf" : std::to_string(t->hi);
            return "[" + lo + "," + hi + "]#" + t->name;
        }
        case Kind::Bin: {
            const Term& a = t->kids[0];
            const Term& b = t->kids[1];
            p = precedence(t->op);
            if (t->op == BinOp::Eq && a->kind == Kind::Pred && is_false(b)) {
                p = kAtom;
                return "!" + expr(a, kAtom);
            }
            std::uint32_t c = 0;
            if (t->op == BinOp::Add && is_const(b, &c) && c >= 0x80000000u)
                return expr(a, p) + " - " + std::to_string(0u - c);
            int left_need = is_comparison(t->op) ? p + 1 : p;
            return operand(a, b, left_need) + " " + std::string(to_string(t->op)) + " " + operand(b, a, p + 1);
        }
        case Kind::And:
        case Kind::Or: {
            p = t->kind == Kind::And ? 2 : 1;
            std::string sep = t->kind == Kind::And ? " && " : " || ";
            std::string s;
            for (std::size_t i = 0; i < t->kids.size(); ++i) {
                if (i) s += sep;
                s += expr(t->kids[i], p + 1);
            }
            return s;
        }
        case Kind::Ite:
            return "ite(" + expr(t->kids[0], 0) + "," + expr(t->kids[1], 0) + "," + expr(t->kids[2], 0) + ")";
        case Kind::Pred: {
            std::string s = t->name + "(";
            for (std::size_t i = 0; i < t->kids.size(); ++i) {
                if (i) s += ",";
                s += expr(t->kids[i], 0);
            }
            return s + ")";
        }
        case Kind::Stream: {
            if (t->segs.empty()) return "\"\"";
            std::string s;
            for (std::size_t i = 0; i < t->segs.size(); ++i) {
                if (i) s += " ++ ";
                s += segment(t->segs[i]);
            }
            if (t->segs.size() > 1) p = 0;
            return s;
        }
        }
        return {};
    }

    PrintOptions opts_;
    std::optional<Affine> far_;
};

// ---------------------------------------------------------------------------

class TermParser {
public:
    TermParser(std::string_view text, const ParseOptions& o) : src_(text), opts_(o) {}

    Term parse() {
        Term t = concat();
        skip();
        if (pos_ != src_.size()) fail("unexpected trailing input");
        return t;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error("constraint parse error at offset " + std::to_string(pos_) + ": " + what + " in '" +
                    std::string(src_) + "'");
    }

    void skip() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool peek(std::string_view tok) {
        skip();
        return src_.substr(pos_, tok.size()) == tok;
    }

    bool eat(std::string_view tok) {
        if (!peek(tok)) return false;
        pos_ += tok.size();
        return true;
    }

    void expect(std::string_view tok) {
        if (!eat(tok)) fail("expected '" + std::string(tok) + "'");
    }

    bool at_digit() {
        skip();
        return pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]));
    }

    std::uint32_t number() {
        if (!at_digit()) fail("expected a number");
        std::uint64_t v = 0;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            v = v * 10 + static_cast<std::uint64_t>(src_[pos_++] - '0');
            if (v > 0xffffffffULL) fail("number out of range");
        }
        return static_cast<std::uint32_t>(v);
    }

    std::string ident() {
        skip();
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        return std::string(src_.substr(start, pos_ - start));
    }

    std::string tag() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' ||
                                      src_[pos_] == '.'))
            ++pos_;
        if (start == pos_) fail("expected a tag");
        return std::string(src_.substr(start, pos_ - start));
    }

    static std::optional<std::uint32_t> kid_of(const std::string& id, std::uint32_t plain) {
        if (id.empty() || id[0] != 'k') return std::nullopt;
        if (id.size() == 1) return plain;
        std::uint64_t v = 0;
        for (std::size_t i = 1; i < id.size(); ++i) {
            if (!std::isdigit(static_cast<unsigned char>(id[i]))) return std::nullopt;
            v = v * 10 + static_cast<std::uint64_t>(id[i] - '0');
            if (v > 0xffffffffULL) return std::nullopt;
        }
        return static_cast<std::uint32_t>(v);
    }

    Affine affine_atom() {
        if (at_digit()) {
            std::uint32_t c = number();
            if (eat("*")) {
                std::size_t save = pos_;
                auto kid = kid_of(ident(), opts_.plain_kid);
                if (!kid) {
                    pos_ = save;
                    fail("expected an induction variable");
                }
                return affine_mul(Affine::var(*kid), c);
            }
            return Affine::constant(c);
        }
        std::size_t save = pos_;
        auto kid = kid_of(ident(), opts_.plain_kid);
        if (!kid) {
            pos_ = save;
            fail("expected an affine index");
        }
        return Affine::var(*kid);
    }

    Affine affine() {
        bool neg = eat("-");
        Affine acc = affine_atom();
        if (neg) acc = affine_mul(acc, 0xffffffffu);
        while (true) {
            bool plus = eat("+");
            bool minus = !plus && eat("-");
            if (!plus && !minus) break;
            Affine rhs = affine_atom();
            auto r = plus ? affine_add(acc, rhs) : affine_sub(acc, rhs);
            if (!r) fail("index mixes induction variables");
            acc = *r;
        }
        return acc;
    }

    Term concat() {
        Term first = or_expr();
        if (!peek("++")) return first;
        Term acc = is_stream(first) ? first : mk_append(mk_empty_stream(), first);
        while (eat("++")) acc = mk_append(acc, or_expr());
        return acc;
    }

    Term or_expr() {
        std::vector<Term> xs{and_expr()};
        while (eat("||")) xs.push_back(and_expr());
        return xs.size() == 1 ? xs[0] : mk_or(std::move(xs));
    }

    Term and_expr() {
        std::vector<Term> xs{cmp_expr()};
        while (eat("&&")) xs.push_back(cmp_expr());
        return xs.size() == 1 ? xs[0] : mk_and(std::move(xs));
    }

    Term cmp_expr() {
        Term a = shift_expr();
        static const std::pair<std::string_view, BinOp> ops[] = {
            {"==", BinOp::Eq}, {"!=", BinOp::Ne}, {"<=", BinOp::Le},
            {">=", BinOp::Ge}, {"<", BinOp::Lt},  {">", BinOp::Gt},
        };
        for (const auto& [tok, op] : ops) {
            if (peek(tok) && !peek("<<") && !peek(">>")) {
                pos_ += tok.size();
                return mk_bin(op, a, shift_expr());
            }
        }
        return a;
    }

    Term shift_expr() {
        Term a = add_expr();
        while (true) {
            if (eat("<<")) {
                a = mk_bin(BinOp::Shl, a, add_expr());
            } else if (eat(">>")) {
                a = mk_bin(BinOp::Shr, a, add_expr());
            } else {
                return a;
            }
        }
    }

    Term add_expr() {
        Term a = mul_expr();
        while (true) {
            if (peek("++")) return a;
            if (eat("+")) {
                a = mk_bin(BinOp::Add, a, mul_expr());
            } else if (eat("-")) {
                a = mk_bin(BinOp::Sub, a, mul_expr());
            } else {
                return a;
            }
        }
    }

    Term mul_expr() {
        Term a = unary();
        while (true) {
            if (eat("*")) {
                a = mk_bin(BinOp::Mul, a, unary());
            } else if (eat("%")) {
                a = mk_bin(BinOp::Mod, a, unary());
            } else {
                return a;
            }
        }
    }

    Term unary() {
        if (peek("!") && !peek("!=")) {
            ++pos_;
            return mk_not(unary());
        }
        if (peek("-") && !peek("-inf")) {
            ++pos_;
            return mk_bin(BinOp::Sub, mk_const(0), unary());
        }
        return primary();
    }

    Term char_literal() {
        ++pos_;
        if (pos_ >= src_.size()) fail("unterminated character literal");
        char c = src_[pos_++];
        if (c == '\\') {
            if (pos_ >= src_.size()) fail("unterminated character literal");
            c = src_[pos_++];
            if (c == 'n') c = '\n';
            if (c == 't') c = '\t';
        }
        if (pos_ >= src_.size() || src_[pos_] != '\'') fail("unterminated character literal");
        ++pos_;
        return mk_const(static_cast<unsigned char>(c));
    }

    Term interval() {
        std::uint32_t lo = 0;
        std::uint32_t hi = 0;
        bool lo_inf = eat("-inf");
        if (!lo_inf) lo = number();
        expect(",");
        bool hi_inf = eat("+inf");
        if (!hi_inf) hi = number();
        expect("]");
        expect("#");
        return mk_interval(lo, hi, lo_inf, hi_inf, tag());
    }

    Term cur_ref() {
        number();
        expect(",");
        std::uint32_t i = number();
        if (eat(":")) {
            std::uint32_t j = number();
            expect("]");
            return mk_cur_window(i, j);
        }
        expect("]");
        return mk_cur(i);
    }

    Term prev_ref() {
        Affine m = affine();
        if (eat("]")) return mk_prev_window(m, Affine::constant(0));
        expect(",");
        Affine a = affine();
        if (eat(":")) {
            Affine b = affine();
            expect("]");
            auto far = affine_sub(m, a);
            auto near = affine_sub(m, b);
            if (!far || !near) fail("index mixes induction variables");
            return mk_prev_window(*far, *near);
        }
        expect("]");
        auto d = affine_sub(m, a);
        if (!d) fail("index mixes induction variables");
        return mk_prev(*d);
    }

    Term primary() {
        skip();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) return mk_const(number());
        if (c == '\'') return char_literal();
        if (eat("(")) {
            Term t = concat();
            expect(")");
            return t;
        }
        if (eat("[")) return interval();
        if (eat("\"\"")) return mk_empty_stream();
        if (eat("s[")) return cur_ref();
        if (eat("t[")) return prev_ref();
        if (eat("top#")) return mk_top_stream(tag());
        std::string id = ident();
        if (id.empty()) fail("unexpected character");
        if (id == "true") return mk_true();
        if (id == "false") return mk_false();
        if (eat("(")) {
            std::vector<Term> args;
            if (!eat(")")) {
                do {
                    args.push_back(concat());
                } while (eat(","));
                expect(")");
            }
            if (id == "ite") {
                if (args.size() != 3) fail("ite takes three arguments");
                return mk_ite(args[0], args[1], args[2]);
            }
            if (id == "byte") {
                if (args.size() != 1) fail("byte takes one argument");
                return mk_append(mk_empty_stream(), args[0]);
            }
            return mk_pred(id, std::move(args));
        }
        if (auto kid = kid_of(id, opts_.plain_kid)) return mk_kvar(*kid);
        fail("unknown identifier '" + id + "'");
    }

    std::string_view src_;
    ParseOptions opts_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string print_term(const Term& t, const PrintOptions& opts) {
    Printer p(opts, t);
    return p.expr(t, 0);
}

Term parse_term(std::string_view text, const ParseOptions& opts) {
    TermParser p(text, opts);
    return p.parse();
}

}  // namespace statelift
