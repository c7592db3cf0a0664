#pragma once

#include "statelift/lang.hpp"

#include <memory>
#include <optional>

namespace statelift {

/// a*k + b over one induction variable; a == 0 is a plain constant (kid is then 0).
struct Affine {
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::uint32_t kid = 0;

    static Affine constant(std::uint32_t v) { return {0, v, 0}; }
    static Affine var(std::uint32_t kid) { return {1, 0, kid}; }
    bool is_const() const { return a == 0; }
    auto operator<=>(const Affine&) const = default;
};

Affine affine_add(Affine x, std::uint32_t c);
std::optional<Affine> affine_add(Affine x, Affine y);
std::optional<Affine> affine_sub(Affine x, Affine y);
Affine affine_mul(Affine x, std::uint32_t c);
/// Value with k bound; constants ignore the binding.
std::uint32_t affine_at(Affine x, std::uint32_t k);
/// Replaces k (for x.kid == kid) by the affine expression r.
Affine affine_subst(Affine x, std::uint32_t kid, Affine r);

struct Node;
using Term = std::shared_ptr<const Node>;

enum class Kind : std::uint8_t { Const, Affine, Cur, Prev, Interval, Bin, Pred, Ite, And, Or, Stream };

/// One piece of a byte stream, oldest piece first within a Stream node.
struct Segment {
    enum class Kind : std::uint8_t { Cur, Prev, Byte, Top };
    Kind kind = Kind::Cur;
    // Cur: current-iteration bytes [lo, hi).
    std::uint32_t lo = 0;
    std::uint32_t hi = 0;
    // Prev: bytes at lookback distance far down to near + 1.
    Affine far;
    Affine near;
    // Byte: low byte of an integer term.
    Term byte;
    // Top: unknown stream of unknown length.
    std::string tag;
};

struct Node {
    Kind kind = Kind::Const;
    BinOp op = BinOp::Add;
    std::uint32_t value = 0;  // Const value, Cur index
    Affine aff;               // Affine value, Prev distance
    std::uint32_t lo = 0;     // Interval bounds
    std::uint32_t hi = 0;
    bool lo_inf = false;
    bool hi_inf = false;
    std::string name;  // Pred name, Interval tag
    std::vector<Term> kids;
    std::vector<Segment> segs;
    std::size_t hash = 0;
};

// ---------------------------------------------------------------------------
// Construction. Every constructor folds constants and returns canonical form.

Term mk_const(std::uint32_t v);
Term mk_true();
Term mk_false();
Term mk_affine(Affine a);
Term mk_kvar(std::uint32_t kid);
/// Byte i of the current iteration.
Term mk_cur(std::uint32_t index);
/// Byte at lookback distance d >= 1 before the current iteration.
Term mk_prev(Affine distance);
Term mk_prev(std::uint32_t distance);
Term mk_interval(std::uint32_t lo, std::uint32_t hi, bool lo_inf, bool hi_inf, std::string tag);
Term mk_full_interval(std::string tag);
Term mk_bin(BinOp op, const Term& a, const Term& b);
Term mk_and(std::vector<Term> xs);
Term mk_and(const Term& a, const Term& b);
Term mk_or(std::vector<Term> xs);
Term mk_or(const Term& a, const Term& b);
Term mk_not(const Term& t);
/// Boolean view of an integer: t != 0.
Term mk_truth(const Term& t);
Term mk_ite(const Term& c, const Term& a, const Term& b);
Term mk_pred(std::string name, std::vector<Term> args);
Term mk_stream(std::vector<Segment> segs);
Term mk_empty_stream();
Term mk_top_stream(std::string tag);
Term mk_cur_window(std::uint32_t lo, std::uint32_t hi);
Term mk_prev_window(Affine far, Affine near);
Term mk_append(const Term& s, const Term& x);

// ---------------------------------------------------------------------------
// Inspection

bool is_stream(const Term& t);
bool is_bool(const Term& t);
bool is_const(const Term& t, std::uint32_t* v = nullptr);
bool is_true(const Term& t);
bool is_false(const Term& t);
bool is_empty_stream(const Term& t);

bool term_equal(const Term& a, const Term& b);
/// Total structural order used for canonical operand sorting.
int term_compare(const Term& a, const Term& b);

struct TermLess {
    bool operator()(const Term& a, const Term& b) const { return term_compare(a, b) < 0; }
};
struct TermHash {
    std::size_t operator()(const Term& t) const { return t->hash; }
};
struct TermEq {
    bool operator()(const Term& a, const Term& b) const { return term_equal(a, b); }
};

bool structurally_contains(const Term& outer, const Term& inner);

struct TermInfo {
    bool has_cur = false;
    bool has_prev = false;
    bool has_unknown = false;  // intervals or Top segments
    bool has_pred = false;
    std::set<std::uint32_t> kids;
    std::uint32_t cur_end = 0;     // 1 + largest current-byte index
    std::uint32_t prev_const_max = 0;  // largest constant lookback distance
};
TermInfo term_info(const Term& t);
bool mentions_k(const Term& t);

/// Conservative unsigned range of a term over all valuations.
struct Range {
    std::uint32_t lo = 0;
    std::uint32_t hi = 0xffffffffu;
    bool singleton() const { return lo == hi; }
    auto operator<=>(const Range&) const = default;
};
Range static_range(const Term& t);

// ---------------------------------------------------------------------------
// Frame shifts

/// Moves an iteration that consumed `width` bytes into the past.
Term advance_term(const Term& t, std::uint32_t width);
/// Inverse of advance for a predecessor that consumed `width` bytes; empty
/// when a lookback reaches before the predecessor's window in a way that
/// cannot be expressed for every k.
std::optional<Term> retreat_term(const Term& t, std::uint32_t width);
/// Re-expresses a constraint for a window that starts `offset` bytes later:
/// current bytes before the offset become lookbacks.
Term shift_frame(const Term& t, std::uint32_t offset);
Term subst_k(const Term& t, std::uint32_t kid, Affine replacement);
Term rename_kid(const Term& t, std::uint32_t from, std::uint32_t to);

/// Splits a conjunction into its conjuncts (a non-And term is one conjunct).
std::vector<Term> conjuncts(const Term& t);
std::vector<Term> disjuncts(const Term& t);

// ---------------------------------------------------------------------------
// Evaluation over ranges. With singleton inputs this is concrete evaluation.

struct StreamValue {
    bool known = false;
    Bytes bytes;
};

class Valuation {
public:
    virtual ~Valuation() = default;
    virtual Range cur(std::uint32_t index) = 0;
    virtual Range prev(std::uint32_t distance) = 0;
    virtual std::optional<std::uint32_t> kvalue(std::uint32_t kid) = 0;
    virtual Range interval(const Node& n) { return {n.lo, n.hi}; }
    /// Predicate application; `args` are set when every argument is concrete.
    virtual Range pred(const Node& app, const std::vector<Value>* args) = 0;
};

Range eval_range(const Term& t, Valuation& val);
StreamValue eval_stream(const Term& t, Valuation& val);

// ---------------------------------------------------------------------------
// Printing and parsing of the constraint notation.

struct PrintOptions {
    std::uint32_t width = 0;  // current-iteration length shown as s[width,i]
    /// When set, induction variables print as plain `k`; otherwise `k<id>`.
    bool plain_k = false;
};

std::string print_term(const Term& t, const PrintOptions& opts = {});

struct ParseOptions {
    /// kid used for a plain `k`.
    std::uint32_t plain_kid = 0;
};
/// Reads back what print_term emits; throws Error on malformed input.
Term parse_term(std::string_view text, const ParseOptions& opts = {});

}  // namespace statelift
