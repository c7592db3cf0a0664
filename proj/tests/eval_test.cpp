#include "statelift/engine.hpp"
#include "statelift/eval.hpp"

#include "data.hpp"

#include <doctest.h>

#include <json.hpp>

using namespace statelift;

namespace {

PredMap iskey_abcd() {
    PredMap m;
    m["iskey"] = [](const std::vector<Value>& a) { return std::get<Bytes>(a.at(0)) == "abcd"; };
    return m;
}

// The abc ground truth with the transition into the final state weakened
// to true.
Fsm weakened_abc() {
    Fsm f = import_json(testdata::read("abc_gt.json"));
    for (auto& t : f.transitions)
        if (f.states[t.to].final) t.constraint = mk_true();
    return f;
}

}  // namespace

TEST_CASE("enumerate_gt_paths") {
    Fsm gt = normalize(import_json(testdata::read("abc_gt.json")));
    PathEnumOptions o;
    o.cap = 10;
    auto ps = enumerate_gt_paths(gt, o);
    REQUIRE(ps.size() == 10);
    CHECK(ps.front().size() == 2);
    for (std::size_t i = 1; i < ps.size(); ++i) CHECK(ps[i - 1].size() <= ps[i].size());
    // Two length-2 paths (a or b, then c), then four of length 3.
    CHECK(ps[1].size() == 2);
    CHECK(ps[2].size() == 3);
    CHECK(ps[5].size() == 3);
    CHECK(ps[6].size() == 4);

    o.cap = 0;
    CHECK(enumerate_gt_paths(gt, o).empty());

    Fsm line;
    line.states = {{0, true, false}, {1, false, true}};
    FsmTransition t;
    t.to = 1;
    t.width = 1;
    t.constraint = mk_true();
    line.transitions.push_back(t);
    auto one = enumerate_gt_paths(line);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == FsmPath{0});
}

TEST_CASE("self comparison is exact") {
    Fsm f3 = import_json(testdata::read("abc_gt.json"));
    EvalReport r3 = precision_recall(f3, f3);
    CHECK(r3.precision == 1.0);
    CHECK(r3.recall == 1.0);
    CHECK(r3.paths_compared > 0);

    Fsm f4 = import_json(testdata::read("token_gt.json"));
    PredMap preds = iskey_abcd();
    EvalOptions o;
    o.preds = &preds;
    o.paths.cap = 40;
    o.paths.k_max = 4;
    o.alphabet = "^abcd:";
    EvalReport r4 = precision_recall(f4, f4, o);
    CHECK(r4.precision == 1.0);
    CHECK(r4.recall == 1.0);
    CHECK(r4.paths_compared > 0);
    bool keyed = false;
    for (const auto& d : r4.paths) keyed = keyed || (d.solved && d.message.ends_with("abcd:"));
    CHECK(keyed);
}

TEST_CASE("weakened final transition") {
    EvalOptions o;
    o.paths.max_len = 3;
    EvalReport r = precision_recall(weakened_abc(), import_json(testdata::read("abc_gt.json")), o);
    // Six ground-truth paths (ac, bc and the four of length 3), each parsed
    // with every step right except the final one: 10 of 16 steps correct.
    CHECK(r.paths_compared == 6);
    CHECK(r.unparsable == 0);
    CHECK(r.precision == doctest::Approx(10.0 / 16.0).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(10.0 / 16.0).epsilon(1e-12));
    CHECK(r.precision < 1.0);
}

TEST_CASE("report output") {
    Fsm f = import_json(testdata::read("abc_gt.json"));
    EvalOptions o;
    o.paths.cap = 3;
    EvalReport r = precision_recall(f, f, o);
    auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["precision"] == 1.0);
    CHECK(j["paths"].size() == 3);
    CHECK(report_table(r).find("precision 1.0000") == 0);
}

TEST_CASE("language_equiv on abc") {
    Program p = parse_program(testdata::read("abc.psl"));
    Fsm f = infer_fsm(p);
    EquivOptions o;
    o.max_len = 6;
    EquivReport r = language_equiv(p, f, o);
    CHECK(r.checked == 5461);
    CHECK(r.disagreements.empty());

    // Dropping the self-loop loses every word longer than two bytes.
    Fsm cut = f;
    std::erase_if(cut.transitions, [](const FsmTransition& t) { return t.from == t.to; });
    EquivReport rc = language_equiv(p, cut, o);
    CHECK(rc.count(Disagreement::SoundnessViolation) > 0);
    CHECK(rc.count(Disagreement::CompletenessGap) == 0);

    o.budget = 100;
    CHECK_THROWS_AS(language_equiv(p, f, o), BudgetExceeded);
}

TEST_CASE("widening only over-approximates") {
    Program p = parse_program("init { x = 0; } do { b = read(); x = x + b; if (x == 200) exit(); } while(1)");
    Fsm f = infer_fsm(p);
    REQUIRE(f.stats.widening_used);
    EquivReport r = language_equiv(p, f);
    CHECK(r.count(Disagreement::SoundnessViolation) == 0);
    CHECK(r.count(Disagreement::CompletenessGap) > 0);
    auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["soundness_violations"] == 0);
}
