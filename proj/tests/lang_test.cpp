#include "statelift/lang.hpp"

#include "data.hpp"
#include "progen.hpp"

#include <doctest.h>

#include <regex>

using namespace statelift;

namespace {

PredMap iskey_abcd() {
    PredMap m;
    m["iskey"] = [](const std::vector<Value>& a) { return std::get<Bytes>(a.at(0)) == "abcd"; };
    return m;
}

std::size_t count_reads(const Block& b) {
    std::size_t n = 0;
    for (const auto& s : b) {
        if (std::holds_alternative<ReadStmt>(s.node)) ++n;
        if (const auto* i = std::get_if<IfStmt>(&s.node)) n += count_reads(i->then_block) + count_reads(i->else_block);
    }
    return n;
}

// Every word over `alpha` of length <= n.
std::vector<Bytes> all_words(const std::string& alpha, std::size_t n) {
    std::vector<Bytes> out{Bytes{}};
    std::vector<Bytes> layer{Bytes{}};
    for (std::size_t len = 1; len <= n; ++len) {
        std::vector<Bytes> next;
        for (const auto& w : layer)
            for (char c : alpha) next.push_back(w + c);
        out.insert(out.end(), next.begin(), next.end());
        layer = std::move(next);
    }
    return out;
}

}  // namespace

TEST_CASE("abc loop parses") {
    Program p = parse_program(testdata::read("abc.psl"));
    CHECK(p.constants.size() == 5);
    CHECK(p.constants.at("A") == 0);
    CHECK(p.constants.at("ERR") == 4);
    // 4 switch arms + 2 in case A + 3 each in cases B and C.
    CHECK(p.branch_count == 12);
    CHECK(p.init.size() == 1);
}

TEST_CASE("minimal loop") {
    Program p = parse_program("do { b = read(); if (b == 5) { exit(); } else { } } while(1)");
    CHECK(p.branch_count == 1);
    CHECK(count_reads(p.body) == 1);
    CHECK(count_decision_vectors(p.body) == 2);
}

TEST_CASE("loop keyword form") {
    Program a = parse_program("loop { b = read(); if (b == 5) exit(); }");
    Program b = parse_program("do { b = read(); if (b == 5) { exit(); } else { } } while(1)");
    CHECK(a == b);
}

TEST_CASE("frontend errors") {
    CHECK_THROWS_AS(parse_program("do { do { b = read(); } while(1); } while(1)"), NestedLoopError);
    CHECK_THROWS_AS(parse_program("do { b = read(); } while(1); do { c = read(); } while(1);"), NestedLoopError);
    CHECK_THROWS_AS(parse_program("const A = 1; const A = 2; do { b = read(); } while(1)"), DuplicateConstError);
    CHECK_THROWS_AS(parse_program("do { if (b == 1) exit(); b = read(); } while(1)"), UndefinedVariableError);
    CHECK_THROWS_AS(parse_program("init { x = 0; }"), SyntaxError);
    try {
        parse_program("do {\n  b = read();\n  b = $;\n} while(1)");
        FAIL("expected a syntax error");
    } catch (const SyntaxError& e) {
        CHECK(e.line() == 3);
        CHECK(e.column() == 7);
    }
}

TEST_CASE("branch labels are assigned in source order") {
    Program p = parse_program("do { b = read(); if (b == 1) { if (b == 2) exit(); } else { if (b == 3) exit(); } } while(1)");
    std::vector<std::uint32_t> ids;
    auto walk = [&](auto&& self, const Block& b) -> void {
        for (const auto& s : b) {
            if (const auto* i = std::get_if<IfStmt>(&s.node)) {
                ids.push_back(i->id.value);
                self(self, i->then_block);
                self(self, i->else_block);
            }
        }
    };
    walk(walk, p.body);
    CHECK(ids == std::vector<std::uint32_t>{0, 1, 2});
}

TEST_CASE("concrete run on abc") {
    Program p = parse_program(testdata::read("abc.psl"));
    PredMap none;
    RunResult r = concrete_run(p, "abbc", none);
    CHECK(r.accepted);
    CHECK(r.bytes_consumed == 4);
    CHECK_FALSE(concrete_run(p, "c", none).accepted);
    CHECK_FALSE(concrete_run(p, "", none).accepted);
    CHECK_FALSE(concrete_run(p, "abbcx", none).accepted);
    // ERR spins without reading; the guard rejects.
    RunResult spin = concrete_run(p, "d", none);
    CHECK_FALSE(spin.accepted);
    CHECK(spin.nonterminating);
}

TEST_CASE("concrete run on token") {
    Program p = parse_program(testdata::read("token.psl"));
    PredMap preds = iskey_abcd();
    CHECK(concrete_run(p, "^^^abcd:", preds).accepted);
    CHECK_FALSE(concrete_run(p, "^^^abce:", preds).accepted);
    CHECK(concrete_run(p, "xy^abcd:", preds).accepted);
    CHECK_FALSE(concrete_run(p, "xy^ab:", preds).accepted);
    CHECK_FALSE(concrete_run(p, "ab", preds).accepted);
    PredMap none;
    CHECK_THROWS_AS(concrete_run(p, "ab:", none), MissingPredicateImpl);
}

TEST_CASE("enumerate_accepted agrees with a regex oracle") {
    Program p = parse_program(testdata::read("abc.psl"));
    PredMap none;
    std::set<Bytes> got = enumerate_accepted(p, "abc", 3, none);
    CHECK(got == std::set<Bytes>{"ac", "bc", "aac", "abc", "bac", "bbc"});
    std::regex re("[ab]+c");
    std::set<Bytes> oracle;
    for (const auto& w : all_words("abcd", 5))
        if (std::regex_match(w, re)) oracle.insert(w);
    CHECK(enumerate_accepted(p, "abcd", 5, none) == oracle);
    CHECK(enumerate_accepted(p, "", 3, none).empty());
    CHECK(enumerate_accepted(p, "abc", 1, none).empty());
    CHECK_THROWS_AS(enumerate_accepted(p, "abcd", 12, none, 1000), BudgetExceeded);
}

TEST_CASE("u32 wraparound semantics") {
    CHECK(apply_u32(BinOp::Add, 0xffffffffu, 2) == 1);
    CHECK(apply_u32(BinOp::Sub, 0, 1) == 0xffffffffu);
    CHECK(apply_u32(BinOp::Mod, 7, 0) == 7);
    CHECK(apply_u32(BinOp::Shl, 1, 33) == 2);
    Program p = parse_program("init { x = 0; } do { x = x - 1; b = read(); if (x == 4294967294) exit(); } while(1)");
    PredMap none;
    CHECK(concrete_run(p, "ab", none).accepted);
    CHECK_FALSE(concrete_run(p, "a", none).accepted);
}

TEST_CASE("messages decode from ASCII or hex") {
    CHECK(decode_message("abc") == "abc");
    CHECK(decode_message("0x6162ff") == Bytes("ab\xff"));
    CHECK(render_bytes("ab") == "ab");
}

TEST_CASE("property: concrete runs are deterministic and count reads") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Program p = parse_program(progen::Generator(seed).program());
        PredMap none;
        for (const auto& m : all_words("abcd", 3)) {
            RunResult a = concrete_run(p, m, none);
            RunResult b = concrete_run(p, m, none);
            CHECK(a.accepted == b.accepted);
            CHECK(a.bytes_consumed == b.bytes_consumed);
            CHECK(a.iteration_paths == b.iteration_paths);
            CHECK(a.bytes_consumed <= m.size());
            // Replaying step() reproduces the consumption count.
            ConcreteState st = initial_state(p, none);
            std::size_t reads = 0;
            for (std::size_t i = 0; i < a.iteration_paths.size(); ++i) {
                StepResult s = step(p, st, m, none);
                reads += s.reads;
                if (s.outcome != StepOutcome::Continue) break;
            }
            CHECK(reads == a.bytes_consumed);
        }
    }
}

TEST_CASE("property: pretty_print round-trips") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Program p = parse_program(progen::Generator(seed).program());
        Program q = parse_program(pretty_print(p));
        CHECK(p == q);
    }
    Program f4 = parse_program(testdata::read("token.psl"));
    CHECK(parse_program(pretty_print(f4)) == f4);
}
