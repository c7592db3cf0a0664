#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace statelift {

/// Byte strings (messages, token buffers) are carried in std::string.
using Bytes = std::string;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t line, std::size_t column, const std::string& what);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class NestedLoopError : public Error {
public:
    using Error::Error;
};

class UndefinedVariableError : public Error {
public:
    using Error::Error;
};

class DuplicateConstError : public Error {
public:
    using Error::Error;
};

class MissingPredicateImpl : public Error {
public:
    using Error::Error;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

/// Raised when a stream value meets an integer-only operator or vice versa.
class TypeError : public Error {
public:
    using Error::Error;
};

struct BranchId {
    std::uint32_t value = 0;
    auto operator<=>(const BranchId&) const = default;
};

using Decision = std::pair<BranchId, bool>;
using DecisionVector = std::vector<Decision>;

enum class BinOp { And, Or, Add, Sub, Gt, Lt, Eq, Ne, Ge, Le, Mul, Mod, Shl, Shr, Append };

std::string_view to_string(BinOp op);
bool is_comparison(BinOp op);

/// u32 semantics shared by the concrete interpreter and constant folding:
/// wraparound arithmetic, x % 0 == x, shift amounts taken modulo 32.
std::uint32_t apply_u32(BinOp op, std::uint32_t a, std::uint32_t b);

struct Operand {
    enum class Kind { Var, Int, EmptyStream };
    Kind kind = Kind::Int;
    std::string name;
    std::uint32_t value = 0;

    static Operand var(std::string n) { return {Kind::Var, std::move(n), 0}; }
    static Operand lit(std::uint32_t v) { return {Kind::Int, {}, v}; }
    static Operand empty_stream() { return {Kind::EmptyStream, {}, 0}; }
    bool operator==(const Operand&) const = default;
};

struct Stmt;
using Block = std::vector<Stmt>;

struct AssignStmt {
    std::string target;
    Operand src;
    bool operator==(const AssignStmt&) const = default;
};

struct BinaryStmt {
    std::string target;
    Operand lhs;
    BinOp op = BinOp::Add;
    Operand rhs;
    bool operator==(const BinaryStmt&) const = default;
};

struct ReadStmt {
    std::string target;
    bool operator==(const ReadStmt&) const = default;
};

/// `v = name(args);` with an extern predicate; v becomes 0 or 1.
struct PredStmt {
    std::string target;
    std::string pred;
    std::vector<Operand> args;
    bool operator==(const PredStmt&) const = default;
};

struct ExitStmt {
    bool operator==(const ExitStmt&) const = default;
};

struct IfStmt {
    BranchId id;
    std::string cond;
    Block then_block;
    Block else_block;
    bool operator==(const IfStmt&) const;
};

struct Stmt {
    std::variant<AssignStmt, BinaryStmt, ReadStmt, PredStmt, ExitStmt, IfStmt> node;
    bool operator==(const Stmt&) const = default;
};

struct PredDecl {
    std::string name;
    std::uint32_t arity = 0;
    bool operator==(const PredDecl&) const = default;
};

struct Program {
    std::map<std::string, std::uint32_t> constants;
    std::vector<PredDecl> extern_preds;
    Block init;
    Block body;
    std::uint32_t branch_count = 0;
    bool operator==(const Program&) const = default;
};

Program parse_program(std::string_view text);
std::string pretty_print(const Program& p);
/// Assigns branch labels in source (pre-)order and updates branch_count.
void renumber_branches(Program& p);

/// Number of syntactic decision vectors through the loop body.
std::size_t count_decision_vectors(const Block& body);
/// Variables with an upward-exposed use somewhere in the body.
std::set<std::string> live_at_entry(const Program& p);

// ---------------------------------------------------------------------------
// Concrete interpreter

using Value = std::variant<std::uint32_t, Bytes>;
using PredImpl = std::function<bool(const std::vector<Value>&)>;
using PredMap = std::map<std::string, PredImpl>;

struct RunResult {
    bool accepted = false;
    std::size_t bytes_consumed = 0;
    std::vector<DecisionVector> iteration_paths;
    bool nonterminating = false;
};

struct RunOptions {
    std::uint32_t guard = 4;
};

/// Variable store plus input position of a running loop.
struct ConcreteState {
    std::map<std::string, Value> vars;
    std::size_t pos = 0;
};

enum class StepOutcome { Continue, Exit, OutOfInput };

struct StepResult {
    StepOutcome outcome = StepOutcome::Continue;
    DecisionVector path;
    std::size_t reads = 0;
};

ConcreteState initial_state(const Program& p, const PredMap& preds);
StepResult step(const Program& p, ConcreteState& st, std::string_view msg, const PredMap& preds);

RunResult concrete_run(const Program& p, std::string_view msg, const PredMap& preds,
                       RunOptions opts = {});

std::set<Bytes> enumerate_accepted(const Program& p, std::string_view alphabet, std::size_t max_len,
                                   const PredMap& preds, std::size_t budget = 4'000'000);

/// Messages on the command line: ASCII, or `0x`-prefixed hex.
Bytes decode_message(std::string_view text);
std::string render_bytes(std::string_view bytes);

}  // namespace statelift
