// veriloop: feedback-driven Verilog generation harness.
// Subcommands: run (one attempt), suite (multi-run experiment), validate
// (corpus check), report (offline re-aggregation of stored traces).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <unistd.h>

#include <CLI11.hpp>

#include "veriloop/corpus.hpp"
#include "veriloop/gateway.hpp"
#include "veriloop/harness.hpp"
#include "veriloop/loop.hpp"

namespace fs = std::filesystem;
using namespace veriloop;

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitConfig = 78;
constexpr int kExitDesignFailed = 2;
constexpr int kExitFault = 1;

fs::path own_directory() {
    char buf[4096];
    ssize_t n = readlink("/proc/self/exe", buf, sizeof buf - 1);
    if (n <= 0) return {};
    buf[n] = '\0';
    return fs::path(buf).parent_path();
}

bool on_path(const std::string& name) {
    const char* path = std::getenv("PATH");
    if (!path) return false;
    std::string paths = path;
    size_t pos = 0;
    while (pos <= paths.size()) {
        size_t colon = paths.find(':', pos);
        std::string dir = paths.substr(pos, colon == std::string::npos ? std::string::npos : colon - pos);
        if (!dir.empty() && access((fs::path(dir) / name).c_str(), X_OK) == 0) return true;
        if (colon == std::string::npos) break;
        pos = colon + 1;
    }
    return false;
}

struct CommonFlags {
    std::string model;
    std::string big_model;
    std::string models_file = "configs/models.conf";
    std::string scripts_root = "fixtures/scripts";
    std::string compiler_cmd;
    std::string runtime_cmd;
    int iterations = 10;
    std::string context = "succinct";
    double timeout_secs = 60.0;
    std::string out_dir = "out";
    std::string workdir;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--model", f.model, "model name from the models file, or scripted:<name>")
        ->required();
    cmd->add_option("--big-model", f.big_model, "ensemble escalation model");
    cmd->add_option("--models", f.models_file, "model definitions file");
    cmd->add_option("--scripts", f.scripts_root, "root directory for scripted:<name> backends");
    cmd->add_option("--compiler", f.compiler_cmd, "Verilog compiler command");
    cmd->add_option("--runtime", f.runtime_cmd, "simulation runtime command");
    cmd->add_option("--iterations", f.iterations, "feedback rounds after the zero-shot generation")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--context", f.context, "context policy: succinct or full")
        ->check(CLI::IsMember({"succinct", "full"}));
    cmd->add_option("--timeout", f.timeout_secs, "compile/simulation timeout in seconds");
    cmd->add_option("--out", f.out_dir, "output directory for traces and reports");
    cmd->add_option("--workdir", f.workdir, "toolchain scratch directory");
}

ModelConfig resolve_model(const std::string& name, const std::string& models_file) {
    if (name.rfind("scripted:", 0) == 0) {
        ModelConfig m;
        m.name = name;
        m.backend = BackendKind::Scripted;
        m.script_name = name.substr(9);
        m.max_tokens = 1 << 20;
        return m;
    }
    if (!fs::exists(models_file))
        throw gateway_error("models file not found: " + models_file);
    auto models = load_model_configs(models_file);
    auto it = models.find(name);
    if (it == models.end())
        throw gateway_error("model '" + name + "' is not defined in " + models_file);
    return it->second;
}

ToolchainConfig resolve_toolchain(const CommonFlags& f, const fs::path& workdir) {
    ToolchainConfig tc;
    tc.workdir_root = workdir;
    tc.compile_timeout = std::chrono::milliseconds(static_cast<long>(f.timeout_secs * 1000));
    tc.sim_timeout = tc.compile_timeout;
    if (!f.compiler_cmd.empty()) {
        tc.compiler_command = f.compiler_cmd;
        tc.runtime_command = f.runtime_cmd.empty() ? "vvp" : f.runtime_cmd;
        return tc;
    }
    if (on_path("iverilog")) return tc; // iverilog + vvp defaults
    fs::path here = own_directory();
    if (!here.empty() && fs::exists(here / "minivc") && fs::exists(here / "minivr")) {
        tc.compiler_command = (here / "minivc").string();
        tc.runtime_command = (here / "minivr").string();
        return tc;
    }
    return tc; // fall through to iverilog; a missing binary reports ToolNotFound
}

std::unique_ptr<ChatBackend> make_backend(const ModelConfig& model, const CommonFlags& f,
                                          const std::string& problem_id, CostLedger& ledger) {
    if (model.backend == BackendKind::Scripted) {
        auto path = resolve_script_path(f.scripts_root, model.script_name, problem_id, 0);
        return std::make_unique<ScriptedBackend>(ScriptedBackend::from_path(path, &ledger));
    }
    return std::make_unique<HttpChatBackend>(&ledger);
}

void print_suite_summary(const SuiteReport& report) {
    std::printf("problems: %zu, runs per problem: %d\n", report.problems.size(),
                report.runs_per_problem);
    for (const auto& [k, pct] : report.pass_at_k_pct) std::printf("pass@%d: %.2f%%\n", k, pct);
    std::printf("best-run classes: success %.2f%%, simulation_error %.2f%%, compile_error %.2f%%\n",
                report.class_pct_by_problem.at("success"),
                report.class_pct_by_problem.at("simulation_error"),
                report.class_pct_by_problem.at("compile_error"));
    for (const auto& [model, entry] : report.ledger) {
        double dollars =
            report.ledger_dollars.count(model) ? report.ledger_dollars.at(model) : 0.0;
        std::printf("%s: %ld calls, %ld in / %ld out tokens, $%.4f\n", model.c_str(), entry.calls,
                    entry.input_tokens, entry.output_tokens, dollars);
    }
}

int cmd_run(const CommonFlags& f, const std::string& problem_dir) {
    Problem problem = load_problem(problem_dir);

    LoopConfig loop;
    loop.model = resolve_model(f.model, f.models_file);
    if (!f.big_model.empty()) loop.big_model = resolve_model(f.big_model, f.models_file);
    loop.max_iterations = f.iterations;
    loop.strategy = f.context == "full" ? ContextStrategy::FullContext : ContextStrategy::Succinct;

    fs::path out_dir = f.out_dir;
    fs::create_directories(out_dir / "traces" / problem.id);
    ToolchainConfig toolchain =
        resolve_toolchain(f, f.workdir.empty() ? (out_dir / "work").string() : f.workdir);

    CostLedger ledger;
    auto small = make_backend(loop.model, f, problem.id, ledger);
    std::unique_ptr<ChatBackend> big;
    if (loop.big_model) big = make_backend(*loop.big_model, f, problem.id, ledger);

    AttemptTrace trace =
        run_attempt(problem, loop, toolchain, *small, big.get(), problem.id + "-r0");
    write_text_file(out_dir / "traces" / problem.id / "000.json",
                    trace_to_json(trace).dump(2) + "\n");

    for (const auto& it : trace.iterations)
        std::printf("iteration %d [%s]: %s\n", it.index, it.model_used.c_str(),
                    outcome_name(it.outcome_class));
    if (!trace.aborted_reason.empty()) {
        std::fprintf(stderr, "attempt aborted: %s\n", trace.aborted_reason.c_str());
        return kExitFault;
    }
    std::printf("final: %s after %d iteration(s)%s, $%.4f, %lld ms\n",
                outcome_name(trace.final_class), trace.iterations_used,
                trace.escalated ? " (escalated)" : "", trace_cost(trace),
                static_cast<long long>(trace.wall_time.count()));
    return trace.final_class == OutcomeClass::Success ? 0 : kExitDesignFailed;
}

int cmd_suite(const CommonFlags& f, const std::string& corpus_dir, int runs,
              const std::string& k_list, int parallel) {
    ExperimentPlan plan;
    plan.corpus_root = corpus_dir;
    plan.loop.model = resolve_model(f.model, f.models_file);
    if (!f.big_model.empty()) plan.loop.big_model = resolve_model(f.big_model, f.models_file);
    plan.loop.max_iterations = f.iterations;
    plan.loop.strategy =
        f.context == "full" ? ContextStrategy::FullContext : ContextStrategy::Succinct;
    plan.runs_per_problem = runs;
    plan.parallelism = parallel;
    plan.out_dir = f.out_dir;
    plan.scripts_root = f.scripts_root;
    plan.toolchain =
        resolve_toolchain(f, f.workdir.empty() ? (fs::path(f.out_dir) / "work").string() : f.workdir);

    plan.k_values.clear();
    std::string item;
    for (char c : k_list + ",") {
        if (c == ',') {
            if (!item.empty()) {
                size_t used = 0;
                int k = 0;
                try {
                    k = std::stoi(item, &used);
                } catch (...) {}
                if (used != item.size() || k < 1)
                    throw domain_error("--k expects comma-separated positive integers, got '" +
                                       item + "'");
                plan.k_values.push_back(k);
            }
            item.clear();
        } else {
            item += c;
        }
    }

    SuiteReport report = run_suite(plan);
    print_suite_summary(report);
    std::printf("report: %s\n", (fs::path(f.out_dir) / "report.json").string().c_str());
    return 0;
}

int cmd_validate(const std::string& corpus_dir) {
    std::vector<CorpusLoadError> errors;
    std::vector<Problem> problems;
    try {
        problems = load_corpus(corpus_dir, &errors);
    } catch (const empty_corpus_error&) {
        // fall through: report the per-directory errors below
    }
    for (const auto& p : problems) {
        std::string category = p.category_major;
        if (!p.category_minor.empty()) category += "/" + p.category_minor;
        std::printf("%s: ok%s\n", p.id.c_str(),
                    category.empty() ? "" : (" (" + category + ")").c_str());
    }
    for (const auto& e : errors)
        std::fprintf(stderr, "%s: ERROR %s\n", e.directory.c_str(), e.message.c_str());
    if (problems.empty()) {
        std::fprintf(stderr, "no valid problems found in %s\n", corpus_dir.c_str());
        return kExitFault;
    }
    return errors.empty() ? 0 : kExitFault;
}

int cmd_report(const std::string& traces_dir, const std::string& out_dir) {
    SuiteReport report = reaggregate_traces_dir(traces_dir);
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "report.json", report_to_json(report).dump(2) + "\n");
    write_text_file(fs::path(out_dir) / "report.csv", report_to_csv(report));
    print_suite_summary(report);
    std::printf("report: %s\n", (fs::path(out_dir) / "report.json").string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"feedback-driven Verilog generation harness"};
    app.require_subcommand(1);

    CommonFlags run_flags, suite_flags;
    std::string problem_dir, corpus_dir, traces_dir, report_out = "report_out";
    int runs = 5, parallel = 1;
    std::string k_list = "1,5";

    CLI::App* run_cmd = app.add_subcommand("run", "run one feedback-loop attempt");
    run_cmd->add_option("--problem", problem_dir, "problem directory")->required();
    add_common_flags(run_cmd, run_flags);

    CLI::App* suite_cmd = app.add_subcommand("suite", "run a full multi-run experiment");
    suite_cmd->add_option("--corpus", corpus_dir, "corpus root directory")->required();
    suite_cmd->add_option("--runs", runs, "attempts per problem")->check(CLI::PositiveNumber);
    suite_cmd->add_option("--k", k_list, "comma-separated k values for pass@k");
    suite_cmd->add_option("--parallel", parallel, "worker count")->check(CLI::PositiveNumber);
    add_common_flags(suite_cmd, suite_flags);

    CLI::App* validate_cmd = app.add_subcommand("validate", "load and invariant-check a corpus");
    std::string validate_dir;
    validate_cmd->add_option("--corpus", validate_dir, "corpus root directory")->required();

    CLI::App* report_cmd = app.add_subcommand("report", "recompute a report from stored traces");
    report_cmd->add_option("--traces", traces_dir, "traces directory from a suite run")->required();
    report_cmd->add_option("--out", report_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run_flags, problem_dir);
        if (suite_cmd->parsed())
            return cmd_suite(suite_flags, corpus_dir, runs, k_list, parallel);
        if (validate_cmd->parsed()) return cmd_validate(validate_dir);
        if (report_cmd->parsed()) return cmd_report(traces_dir, report_out);
    } catch (const tool_not_found_error& e) {
        std::fprintf(stderr, "configuration fault: %s\n", e.what());
        return kExitConfig;
    } catch (const auth_missing_error& e) {
        std::fprintf(stderr, "configuration fault: %s\n", e.what());
        return kExitConfig;
    } catch (const domain_error& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const provider_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFault;
    } catch (const script_exhausted_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFault;
    } catch (const gateway_error& e) {
        std::fprintf(stderr, "configuration fault: %s\n", e.what());
        return kExitConfig;
    } catch (const veriloop::error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFault;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFault;
    }
    return kExitUsage;
}
