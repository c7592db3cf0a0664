#include "statelift/engine.hpp"
#include "statelift/eval.hpp"

#include "progen.hpp"

#include <doctest.h>

using namespace statelift;

// The acceptance binary runs the full-size sweep; these keep a smaller one
// in the unit suite.

TEST_CASE("property: inferred machines are sound, conditionally complete and bounded") {
    std::size_t widened = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::string src = progen::Generator(seed).program();
        Program p = parse_program(src);
        Fsm f = infer_fsm(p);
        EquivOptions o;
        o.max_len = 4;
        EquivReport r = language_equiv(p, f, o);
        INFO("seed " << seed << "\n" << src);
        CHECK(r.count(Disagreement::SoundnessViolation) == 0);
        if (f.stats.widening_used)
            ++widened;
        else
            CHECK(r.count(Disagreement::CompletenessGap) == 0);
        std::size_t n = f.stats.decision_vectors;
        CHECK(f.engine_state_count() <= n);
        CHECK(f.transitions.size() <= n * n);
    }
    CHECK(widened < 50);
}

TEST_CASE("property: inference is deterministic") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        Program p = parse_program(progen::Generator(seed).program());
        Fsm a = infer_fsm(p);
        Fsm b = infer_fsm(p);
        CHECK(fsm_equal(a, b));
        CHECK(export_json(a) == export_json(b));
    }
}

TEST_CASE("property: generated messages are accepted by the machine and the loop") {
    PredMap none;
    std::size_t total = 0;
    for (std::uint64_t seed = 200; seed < 230; ++seed) {
        Program p = parse_program(progen::Generator(seed).program());
        Fsm f = infer_fsm(p);
        GenOptions g;
        g.max_len = 4;
        g.max_count = 20;
        g.alphabet = "abcd";
        for (const auto& m : generate_messages(f, g)) {
            ++total;
            CHECK(accepts(f, m));
            if (!f.stats.approximate) CHECK(concrete_run(p, m, none).accepted);
        }
    }
    CHECK(total > 0);
}

TEST_CASE("property: JSON export round-trips inferred machines") {
    for (std::uint64_t seed = 300; seed < 330; ++seed) {
        Fsm f = infer_fsm(parse_program(progen::Generator(seed).program()));
        CHECK(fsm_equal(import_json(export_json(f)), f));
    }
}
