#include "statelift/engine.hpp"
#include "statelift/eval.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace statelift;

namespace {

enum Exit { kOk = 0, kUsage = 1, kApproximate = 2, kInternal = 3 };

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

std::string value_text(const Value& v) {
    if (const auto* b = std::get_if<Bytes>(&v)) return *b;
    return std::to_string(std::get<std::uint32_t>(v));
}

// NAME=w1,w2 holds for the listed words; NAME=* always holds.
PredMap parse_preds(const std::vector<std::string>& specs) {
    PredMap out;
    for (const auto& spec : specs) {
        auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--pred", "expected NAME=w1,w2 or NAME=*");
        std::string name = spec.substr(0, eq);
        std::string rest = spec.substr(eq + 1);
        if (rest == "*") {
            out[name] = [](const std::vector<Value>&) { return true; };
            continue;
        }
        std::set<std::string> words;
        std::stringstream ss(rest);
        for (std::string w; std::getline(ss, w, ',');) words.insert(decode_message(w));
        out[name] = [words](const std::vector<Value>& args) {
            return !args.empty() && words.count(value_text(args[0])) > 0;
        };
    }
    return out;
}

struct Common {
    std::uint32_t induction_delay = 3;
    std::uint32_t k_max = 16;
    std::uint32_t budget_ms = 5000;
    std::uint32_t guard = 4;
    std::vector<std::string> preds;
    std::uint64_t seed = 0;
    bool json = false;

    EngineConfig engine() const {
        EngineConfig c;
        c.induction_delay = induction_delay;
        c.k_max = k_max;
        c.solver_budget_ms = budget_ms;
        return c;
    }
};

void add_engine_flags(CLI::App* app, Common& c) {
    app->add_option("--induction-delay", c.induction_delay, "iterations before an induction guess")->capture_default_str();
    app->add_option("--k-max", c.k_max, "largest induction count")->capture_default_str();
    app->add_option("--solver-budget-ms", c.budget_ms, "per-query solver time budget")->capture_default_str();
}

void add_pred_flag(CLI::App* app, Common& c) {
    app->add_option("--pred", c.preds, "predicate implementation NAME=w1,w2 or NAME=*");
}

Program load_program(const std::string& path) { return parse_program(read_file(path)); }

int cmd_infer(const std::string& path, const std::string& json_out, const std::string& dot_out, const Common& c) {
    Program p = load_program(path);
    auto t0 = std::chrono::steady_clock::now();
    Fsm f = infer_fsm(p, c.engine());
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!json_out.empty()) write_file(json_out, export_json(f));
    if (!dot_out.empty()) write_file(dot_out, export_dot(f));
    if (c.json) {
        nlohmann::json j{{"states", f.states.size()},
                         {"transitions", f.transitions.size()},
                         {"widening_used", f.stats.widening_used},
                         {"approximate", f.stats.approximate},
                         {"seconds", secs}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("states %zu  transitions %zu  widening_used %s  time %.3fs\n", f.states.size(),
                    f.transitions.size(), f.stats.widening_used ? "yes" : "no", secs);
        if (json_out.empty() && dot_out.empty()) std::cout << export_dot(f);
    }
    return f.stats.approximate ? kApproximate : kOk;
}

int cmd_run(const std::string& path, const std::string& input, const std::string& fsm_path, const Common& c) {
    PredMap preds = parse_preds(c.preds);
    Bytes msg = decode_message(input);
    bool accepted = false;
    if (!fsm_path.empty()) {
        AcceptOptions ao;
        ao.k_max = c.k_max;
        ao.preds = &preds;
        accepted = accepts(import_json(read_file(fsm_path)), msg, ao);
    } else {
        RunOptions ro;
        ro.guard = c.guard;
        accepted = concrete_run(load_program(path), msg, preds, ro).accepted;
    }
    if (c.json) {
        std::cout << nlohmann::json{{"message", render_bytes(msg)}, {"accepted", accepted}}.dump() << "\n";
    } else {
        std::cout << (accepted ? "accepted" : "rejected") << "\n";
    }
    return kOk;
}

int cmd_gen(const std::string& path, std::size_t count, std::size_t max_len, const std::string& alphabet,
            const Common& c) {
    PredMap preds = parse_preds(c.preds);
    GenOptions g;
    g.max_count = count;
    g.max_len = max_len;
    g.seed = c.seed;
    g.k_max = c.k_max;
    g.alphabet = alphabet;
    g.preds = &preds;
    auto msgs = generate_messages(import_json(read_file(path)), g);
    if (c.json) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& m : msgs) j.push_back(render_bytes(m));
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& m : msgs) std::cout << render_bytes(m) << "\n";
    }
    return kOk;
}

int cmd_eval(const std::string& inferred, const std::string& gt, std::size_t cap, const std::string& alphabet,
             const Common& c) {
    PredMap preds = parse_preds(c.preds);
    EvalOptions o;
    o.paths.cap = cap;
    o.paths.k_max = c.k_max;
    o.preds = &preds;
    o.alphabet = alphabet;
    EvalReport r = precision_recall(import_json(read_file(inferred)), import_json(read_file(gt)), o);
    std::cout << (c.json ? report_json(r) : report_table(r));
    return kOk;
}

int cmd_check(const std::string& path, std::size_t max_len, const std::string& alphabet, const Common& c) {
    Program p = load_program(path);
    PredMap preds = parse_preds(c.preds);
    Fsm f = infer_fsm(p, c.engine());
    EquivOptions o;
    o.alphabet = alphabet;
    o.max_len = max_len;
    o.preds = &preds;
    o.k_max = c.k_max;
    o.guard = c.guard;
    EquivReport r = language_equiv(p, f, o);
    if (c.json) {
        std::cout << report_json(r);
    } else {
        std::printf("checked %zu  soundness-violations %zu  completeness-gaps %zu\n", r.checked,
                    r.count(Disagreement::SoundnessViolation), r.count(Disagreement::CompletenessGap));
        for (const auto& [m, kind] : r.disagreements)
            std::cout << "  " << render_bytes(m) << "  "
                      << (kind == Disagreement::SoundnessViolation ? "soundness-violation" : "completeness-gap")
                      << "\n";
    }
    if (r.count(Disagreement::SoundnessViolation) > 0) return kInternal;
    return f.stats.approximate ? kApproximate : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"statelift: infer message state machines from parsing loops"};
    app.require_subcommand(1);
    Common c;
    if (const char* env = std::getenv("STATELIFT_SOLVER_BUDGET_MS")) {
        try {
            c.budget_ms = static_cast<std::uint32_t>(std::stoul(env));
        } catch (const std::exception&) {
            std::cerr << "error: STATELIFT_SOLVER_BUDGET_MS is not a number\n";
            return kUsage;
        }
    }

    std::string program, input, fsm_in, json_out, dot_out, inferred, gt;
    std::string alphabet;
    std::size_t count = 100, max_len = 8, cap = 10'000;

    auto* infer = app.add_subcommand("infer", "infer the FSM of a .psl program");
    infer->add_option("program", program, "program file")->required();
    infer->add_option("--json", json_out, "write the FSM as JSON");
    infer->add_option("--dot", dot_out, "write the FSM as DOT");
    infer->add_flag("--summary-json", c.json, "print the summary as JSON");
    add_engine_flags(infer, c);

    auto* run = app.add_subcommand("run", "run a message through the loop (or an FSM)");
    run->add_option("program", program, "program file");
    run->add_option("--input", input, "message, ASCII or 0x-hex")->required();
    run->add_option("--fsm", fsm_in, "simulate this FSM JSON instead of the program");
    run->add_option("--guard", c.guard, "nontermination guard factor")->capture_default_str();
    run->add_option("--k-max", c.k_max, "largest induction count")->capture_default_str();
    run->add_flag("--json", c.json, "machine-readable output");
    add_pred_flag(run, c);

    auto* gen = app.add_subcommand("gen", "generate messages from an FSM JSON");
    gen->add_option("fsm", fsm_in, "FSM JSON file")->required();
    gen->add_option("--count", count, "maximum number of messages")->capture_default_str();
    gen->add_option("--max-len", max_len, "maximum message length")->capture_default_str();
    gen->add_option("--alphabet", alphabet, "restrict generated bytes");
    gen->add_option("--seed", c.seed, "0 keeps lexicographic order")->capture_default_str();
    gen->add_option("--k-max", c.k_max, "largest induction count")->capture_default_str();
    gen->add_flag("--json", c.json, "machine-readable output");
    add_pred_flag(gen, c);

    auto* eval = app.add_subcommand("eval", "precision and recall against a ground-truth FSM");
    eval->add_option("inferred", inferred, "inferred FSM JSON")->required();
    eval->add_option("gt", gt, "ground-truth FSM JSON")->required();
    eval->add_option("--cap", cap, "ground-truth paths compared")->capture_default_str();
    eval->add_option("--alphabet", alphabet, "restrict synthesized bytes");
    eval->add_option("--k-max", c.k_max, "largest induction count")->capture_default_str();
    eval->add_flag("--json", c.json, "machine-readable output");
    add_pred_flag(eval, c);

    auto* check = app.add_subcommand("check", "compare the loop and its inferred FSM on all short messages");
    check->add_option("program", program, "program file")->required();
    check->add_option("--max-len", max_len, "longest message")->capture_default_str();
    check->add_option("--alphabet", alphabet, "message bytes")->required();
    check->add_option("--guard", c.guard, "nontermination guard factor")->capture_default_str();
    check->add_flag("--json", c.json, "machine-readable output");
    add_engine_flags(check, c);
    add_pred_flag(check, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*infer) return cmd_infer(program, json_out, dot_out, c);
        if (*run) {
            if (program.empty() && fsm_in.empty()) throw CLI::ValidationError("run", "needs a program or --fsm");
            return cmd_run(program, input, fsm_in, c);
        }
        if (*gen) return cmd_gen(fsm_in, count, max_len, alphabet, c);
        if (*eval) return cmd_eval(inferred, gt, cap, alphabet, c);
        if (*check) return cmd_check(program, max_len, alphabet, c);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const SyntaxError& e) {
        std::cerr << program << ":" << e.line() << ":" << e.column() << ": " << e.what() << "\n";
        return kUsage;
    } catch (const NestedLoopError& e) {
        std::cerr << "NestedLoopError: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kUsage;
}
