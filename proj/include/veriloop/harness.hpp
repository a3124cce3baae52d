#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "veriloop/corpus.hpp"
#include "veriloop/loop.hpp"

namespace veriloop {

class harness_error : public error {
public:
    using error::error;
};

class domain_error : public harness_error {
public:
    using harness_error::harness_error;
};

class output_unwritable_error : public harness_error {
public:
    using harness_error::harness_error;
};

// Unbiased estimator of drawing at least one correct sample in k draws
// without replacement from r samples of which c are correct:
//   1 - C(r-c, k) / C(r, k)
// computed in product form to avoid factorial overflow.
inline double pass_at_k(int samples, int correct, int k) {
    if (samples < 1 || correct < 0 || correct > samples || k < 1 || k > samples)
        throw domain_error("pass_at_k: need 0 <= c <= r and 1 <= k <= r");
    double ratio = 1.0;
    for (int i = 0; i < k; i++) {
        int numerator = samples - correct - i;
        if (numerator <= 0) return 1.0;
        ratio *= static_cast<double>(numerator) / static_cast<double>(samples - i);
    }
    return 1.0 - ratio;
}

struct ExperimentPlan {
    std::filesystem::path corpus_root;
    LoopConfig loop;
    ToolchainConfig toolchain;
    int runs_per_problem = 5;
    std::vector<int> k_values = {1, 5};
    int parallelism = 1;
    std::filesystem::path out_dir = "out";
    std::filesystem::path scripts_root; // for scripted:<name> backends
};

inline void validate_plan(const ExperimentPlan& plan) {
    if (plan.runs_per_problem < 1) throw domain_error("runs_per_problem must be >= 1");
    if (plan.k_values.empty()) throw domain_error("at least one k value required");
    for (int k : plan.k_values)
        if (k < 1 || k > plan.runs_per_problem)
            throw domain_error("every k must satisfy 1 <= k <= runs_per_problem");
    if (plan.parallelism < 1) throw domain_error("parallelism must be >= 1");
}

// Mismatch count of the attempt's final simulation, when one produced a
// report. Timeouts and crashes rank worst.
inline std::optional<long> final_mismatches(const AttemptTrace& t) {
    if (t.iterations.empty()) return std::nullopt;
    const auto& last = t.iterations.back();
    if (last.sim) return last.sim->mismatch_count;
    return std::nullopt;
}

inline int class_rank(OutcomeClass c) {
    switch (c) {
        case OutcomeClass::Success: return 0;
        case OutcomeClass::SimulationError: return 1;
        case OutcomeClass::CompileError: return 2;
    }
    return 2;
}

// Best run of a problem: Success > SimulationError > CompileError, then
// fewer final mismatches, then fewer iterations, then lowest run index.
inline size_t classify_best(const std::vector<AttemptTrace>& traces) {
    if (traces.empty()) throw harness_error("classify_best: no traces");
    size_t best = 0;
    for (size_t i = 1; i < traces.size(); i++) {
        const AttemptTrace& a = traces[i];
        const AttemptTrace& b = traces[best];
        int ra = class_rank(a.final_class), rb = class_rank(b.final_class);
        if (ra != rb) {
            if (ra < rb) best = i;
            continue;
        }
        if (a.final_class == OutcomeClass::SimulationError) {
            long ma = final_mismatches(a).value_or(std::numeric_limits<long>::max());
            long mb = final_mismatches(b).value_or(std::numeric_limits<long>::max());
            if (ma != mb) {
                if (ma < mb) best = i;
                continue;
            }
        }
        if (a.iterations_used < b.iterations_used) best = i;
    }
    return best;
}

struct ProblemSummary {
    std::string id;
    std::string category_major;
    std::string category_minor;
    std::vector<AttemptTrace> traces; // classified traces, in run order
    size_t best = 0;
    int correct = 0;
};

struct SuiteReport {
    std::string fingerprint;
    int runs_per_problem = 0;
    std::vector<int> k_values;
    std::string model_name, big_model_name, strategy_name;
    int max_iterations = 0;
    std::vector<ProblemSummary> problems;
    std::map<int, double> pass_at_k_pct;                    // by problem
    std::map<std::string, double> class_pct_by_problem;     // best-run classes
    std::map<std::string, double> class_pct_by_testcase;    // weighted by total_tests of best run
    std::map<std::string, double> class_pct_all_runs;
    std::map<std::string, CostLedger::Entry> ledger;
    std::map<std::string, double> ledger_dollars;
};

namespace detail {

inline void add_class_pct(std::map<std::string, double>& out, const std::map<std::string, double>& weights,
                          double total) {
    for (const char* name : {"success", "simulation_error", "compile_error"}) {
        auto it = weights.find(name);
        double w = it == weights.end() ? 0.0 : it->second;
        out[name] = total > 0 ? w / total * 100.0 : 0.0;
    }
}

} // namespace detail

// Pure aggregation over completed traces; run_suite and offline report
// recomputation share this path.
inline SuiteReport aggregate_traces(std::vector<ProblemSummary> problems,
                                    int runs_per_problem,
                                    const std::vector<int>& k_values,
                                    const std::string& fingerprint) {
    SuiteReport report;
    report.fingerprint = fingerprint;
    report.runs_per_problem = runs_per_problem;
    report.k_values = k_values;

    std::map<std::string, double> weight_by_problem, weight_by_testcase, weight_all_runs;
    double testcase_total = 0;
    long all_runs_total = 0;
    long classified_problems = 0;

    for (auto& p : problems) {
        p.correct = 0;
        if (p.traces.empty()) continue; // every attempt aborted unclassified
        classified_problems++;
        for (const auto& t : p.traces)
            if (t.final_class == OutcomeClass::Success) p.correct++;
        p.best = classify_best(p.traces);

        const AttemptTrace& best = p.traces[p.best];
        weight_by_problem[outcome_name(best.final_class)] += 1.0;

        double w = 1.0; // problems whose best run never simulated weigh one test
        if (!best.iterations.empty() && best.iterations.back().sim)
            w = static_cast<double>(best.iterations.back().sim->total_tests);
        if (w <= 0) w = 1.0;
        weight_by_testcase[outcome_name(best.final_class)] += w;
        testcase_total += w;

        for (const auto& t : p.traces) {
            weight_all_runs[outcome_name(t.final_class)] += 1.0;
            all_runs_total++;
            for (const auto& it : t.iterations) {
                auto& e = report.ledger[it.model_used];
                e.calls++;
                e.input_tokens += it.input_tokens;
                e.output_tokens += it.output_tokens;
                bool big = !t.big_model_name.empty() && it.model_used == t.big_model_name;
                report.ledger_dollars[it.model_used] +=
                    it.input_tokens / 1000.0 * (big ? t.big_input_rate : t.model_input_rate) +
                    it.output_tokens / 1000.0 * (big ? t.big_output_rate : t.model_output_rate);
            }
        }

        if (report.model_name.empty() && !p.traces.empty()) {
            report.model_name = p.traces[0].model_name;
            report.big_model_name = p.traces[0].big_model_name;
            report.max_iterations = p.traces[0].max_iterations;
            report.strategy_name =
                p.traces[0].strategy == ContextStrategy::Succinct ? "succinct" : "full";
        }
    }

    for (int k : k_values) {
        double sum = 0;
        for (const auto& p : problems) {
            int r_eff = static_cast<int>(p.traces.size());
            if (r_eff == 0) continue;
            sum += pass_at_k(r_eff, p.correct, std::min(k, r_eff));
        }
        report.pass_at_k_pct[k] = problems.empty() ? 0.0 : sum / problems.size() * 100.0;
    }

    detail::add_class_pct(report.class_pct_by_problem, weight_by_problem,
                          static_cast<double>(classified_problems));
    detail::add_class_pct(report.class_pct_by_testcase, weight_by_testcase, testcase_total);
    detail::add_class_pct(report.class_pct_all_runs, weight_all_runs,
                          static_cast<double>(all_runs_total));

    report.problems = std::move(problems);
    return report;
}

inline std::string plan_fingerprint(const ExperimentPlan& plan, const std::vector<Problem>& problems) {
    std::string acc = plan.loop.model.name + "|" +
                      (plan.loop.big_model ? plan.loop.big_model->name : "") + "|" +
                      std::to_string(plan.loop.max_iterations) + "|" +
                      (plan.loop.strategy == ContextStrategy::Succinct ? "succinct" : "full") + "|" +
                      std::to_string(plan.runs_per_problem) + "|";
    for (int k : plan.k_values) acc += std::to_string(k) + ",";
    uint64_t h = fnv1a64(acc);
    h = fnv1a64(system_prompt(), h);
    for (const auto& p : problems) {
        h = fnv1a64(p.id, h);
        h = fnv1a64(p.design_prompt, h);
        h = fnv1a64(p.testbench_source, h);
    }
    return to_hex(h);
}

inline nlohmann::json report_to_json(const SuiteReport& r) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config_fingerprint"] = r.fingerprint;
    j["plan"] = {{"model", r.model_name},
                 {"big_model", r.big_model_name},
                 {"max_iterations", r.max_iterations},
                 {"strategy", r.strategy_name},
                 {"runs_per_problem", r.runs_per_problem},
                 {"k_values", r.k_values}};

    nlohmann::json jproblems = nlohmann::json::object();
    std::map<std::string, std::vector<const ProblemSummary*>> by_major;
    std::map<std::string, std::vector<const ProblemSummary*>> by_minor;
    for (const auto& p : r.problems) {
        nlohmann::json jp;
        jp["category_major"] = p.category_major;
        jp["category_minor"] = p.category_minor;
        jp["correct"] = p.correct;
        jp["runs"] = p.traces.size();
        jp["best_run"] = p.best;
        jp["best_class"] = p.traces.empty() ? "" : outcome_name(p.traces[p.best].final_class);
        nlohmann::json jruns = nlohmann::json::array();
        for (const auto& t : p.traces) {
            auto mm = final_mismatches(t);
            nlohmann::json jr = {{"class", outcome_name(t.final_class)},
                                 {"iterations", t.iterations_used},
                                 {"escalated", t.escalated},
                                 {"mismatches", mm ? nlohmann::json(*mm) : nlohmann::json(nullptr)},
                                 {"total_tests", !t.iterations.empty() && t.iterations.back().sim
                                                     ? nlohmann::json(t.iterations.back().sim->total_tests)
                                                     : nlohmann::json(nullptr)},
                                 {"dollars", trace_cost(t)}};
            long in_tok = 0, out_tok = 0;
            for (const auto& it : t.iterations) {
                in_tok += it.input_tokens;
                out_tok += it.output_tokens;
            }
            jr["input_tokens"] = in_tok;
            jr["output_tokens"] = out_tok;
            jruns.push_back(std::move(jr));
        }
        jp["per_run"] = std::move(jruns);
        jproblems[p.id] = std::move(jp);
        by_major[p.category_major].push_back(&p);
        by_minor[p.category_major + "/" + p.category_minor].push_back(&p);
    }
    j["problems"] = std::move(jproblems);

    nlohmann::json jpass = nlohmann::json::object();
    for (const auto& [k, v] : r.pass_at_k_pct) jpass[std::to_string(k)] = v;
    j["pass_at_k"] = std::move(jpass);
    j["class_percentages"] = {{"by_problem", r.class_pct_by_problem},
                              {"by_testcase", r.class_pct_by_testcase},
                              {"all_runs", r.class_pct_all_runs}};

    auto rollup = [&](const std::map<std::string, std::vector<const ProblemSummary*>>& groups) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [name, members] : groups) {
            int successes = 0;
            for (const auto* p : members)
                if (!p->traces.empty() &&
                    p->traces[p->best].final_class == OutcomeClass::Success)
                    successes++;
            out[name] = {{"problems", members.size()},
                         {"best_success_pct",
                          members.empty() ? 0.0 : 100.0 * successes / members.size()}};
        }
        return out;
    };
    j["categories_major"] = rollup(by_major);
    j["categories_minor"] = rollup(by_minor);

    nlohmann::json jledger = nlohmann::json::object();
    for (const auto& [model, e] : r.ledger) {
        jledger[model] = {{"calls", e.calls},
                          {"input_tokens", e.input_tokens},
                          {"output_tokens", e.output_tokens},
                          {"dollars", r.ledger_dollars.count(model) ? r.ledger_dollars.at(model) : 0.0}};
    }
    j["ledger"] = std::move(jledger);
    return j;
}

inline std::string report_to_csv(const SuiteReport& r) {
    std::string csv = "problem,run,class,iterations,escalated,mismatches,total_tests,"
                      "input_tokens,output_tokens,dollars\n";
    char buf[64];
    for (const auto& p : r.problems) {
        for (size_t run = 0; run < p.traces.size(); run++) {
            const auto& t = p.traces[run];
            auto mm = final_mismatches(t);
            long total = !t.iterations.empty() && t.iterations.back().sim
                             ? t.iterations.back().sim->total_tests : -1;
            long in_tok = 0, out_tok = 0;
            for (const auto& it : t.iterations) {
                in_tok += it.input_tokens;
                out_tok += it.output_tokens;
            }
            std::snprintf(buf, sizeof buf, "%.6f", trace_cost(t));
            csv += p.id + "," + std::to_string(run) + "," + outcome_name(t.final_class) + "," +
                   std::to_string(t.iterations_used) + "," + (t.escalated ? "1" : "0") + "," +
                   (mm ? std::to_string(*mm) : "") + "," + (total >= 0 ? std::to_string(total) : "") +
                   "," + std::to_string(in_tok) + "," + std::to_string(out_tok) + "," + buf + "\n";
        }
    }
    return csv;
}

namespace detail {

// A usable script path is a regular file or a directory holding at least one.
inline bool is_script_path(const std::filesystem::path& p) {
    namespace fs = std::filesystem;
    if (fs::is_regular_file(p)) return true;
    if (!fs::is_directory(p)) return false;
    for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file()) return true;
    return false;
}

} // namespace detail

// Resolves the script directory for one attempt. Most specific wins:
//   <root>/<name>/<problem>/run<NNN>/ then <root>/<name>/<problem>/ then
//   <root>/<name>/ (directory of files or single script file).
inline std::filesystem::path resolve_script_path(const std::filesystem::path& scripts_root,
                                                 const std::string& script_name,
                                                 const std::string& problem_id,
                                                 int run_index) {
    namespace fs = std::filesystem;
    char run_name[16];
    std::snprintf(run_name, sizeof run_name, "run%03d", run_index);
    fs::path base = scripts_root / script_name;
    fs::path per_run = base / problem_id / run_name;
    if (detail::is_script_path(per_run)) return per_run;
    fs::path per_problem = base / problem_id;
    if (detail::is_script_path(per_problem)) return per_problem;
    if (detail::is_script_path(base)) return base;
    if (fs::is_regular_file(base.string() + ".txt")) return base.string() + ".txt";
    throw gateway_error("no script found for '" + script_name + "' (problem '" + problem_id +
                        "') under " + scripts_root.string());
}

namespace detail {

struct AttemptJob {
    size_t problem_index;
    int run_index;
};

} // namespace detail

// Executes runs_per_problem attempts per problem with a bounded worker pool,
// writes traces under <out>/traces/<problem>/<run>.json, and aggregates.
// Aborted attempts are retried once and kept only if they classified.
inline SuiteReport run_suite(const ExperimentPlan& plan,
                             HttpChatBackend::Sleeper sleeper = nullptr) {
    namespace fs = std::filesystem;
    validate_plan(plan);

    std::vector<Problem> problems = load_corpus(plan.corpus_root);
    std::string fingerprint = plan_fingerprint(plan, problems);

    std::error_code ec;
    fs::create_directories(plan.out_dir / "traces", ec);
    if (ec) throw output_unwritable_error("cannot create output directory: " + plan.out_dir.string());

    CostLedger ledger;
    HttpChatBackend http_backend(&ledger, sleeper);

    auto make_backend = [&](const ModelConfig& cfg, const std::string& problem_id,
                            int run_index) -> std::unique_ptr<ChatBackend> {
        if (cfg.backend == BackendKind::Scripted) {
            auto path = resolve_script_path(plan.scripts_root, cfg.script_name, problem_id, run_index);
            return std::make_unique<ScriptedBackend>(ScriptedBackend::from_path(path, &ledger));
        }
        return nullptr; // shared HTTP client
    };

    std::vector<std::vector<AttemptTrace>> results(problems.size());
    for (auto& v : results) v.resize(plan.runs_per_problem);

    std::vector<detail::AttemptJob> jobs;
    for (size_t p = 0; p < problems.size(); p++)
        for (int run = 0; run < plan.runs_per_problem; run++) jobs.push_back({p, run});

    std::atomic<size_t> next_job{0};
    std::mutex io_mutex;
    std::vector<std::string> fatal_errors;
    std::exception_ptr first_fault;

    auto worker = [&]() {
        while (true) {
            size_t idx = next_job.fetch_add(1);
            if (idx >= jobs.size()) return;
            const auto& job = jobs[idx];
            const Problem& problem = problems[job.problem_index];
            std::string label = problem.id + "-r" + std::to_string(job.run_index);
            try {
                AttemptTrace trace;
                for (int tries = 0; tries < 2; tries++) {
                    auto small_owned = make_backend(plan.loop.model, problem.id, job.run_index);
                    ChatBackend* small = small_owned ? small_owned.get()
                                                     : static_cast<ChatBackend*>(&http_backend);
                    std::unique_ptr<ChatBackend> big_owned;
                    ChatBackend* big = nullptr;
                    if (plan.loop.big_model) {
                        big_owned = make_backend(*plan.loop.big_model, problem.id, job.run_index);
                        big = big_owned ? big_owned.get() : static_cast<ChatBackend*>(&http_backend);
                    }
                    ToolchainConfig toolchain = plan.toolchain;
                    trace = run_attempt(problem, plan.loop, toolchain, *small, big,
                                        label + (tries ? "-retry" : ""));
                    trace.run_index = job.run_index;
                    if (trace.aborted_reason.empty()) break;
                }
                results[job.problem_index][job.run_index] = trace;

                fs::path dir = plan.out_dir / "traces" / problem.id;
                {
                    std::lock_guard lock(io_mutex);
                    fs::create_directories(dir);
                }
                nlohmann::json j = trace_to_json(trace);
                j["suite"] = {{"runs_per_problem", plan.runs_per_problem},
                              {"k_values", plan.k_values},
                              {"fingerprint", fingerprint}};
                char run_name[16];
                std::snprintf(run_name, sizeof run_name, "%03d", job.run_index);
                write_text_file(dir / (std::string(run_name) + ".json"), j.dump(2) + "\n");
            } catch (const std::exception& e) {
                std::lock_guard lock(io_mutex);
                if (!first_fault) first_fault = std::current_exception();
                fatal_errors.push_back(problem.id + " run " + std::to_string(job.run_index) + ": " +
                                       e.what());
            }
        }
    };

    int workers = std::min<int>(plan.parallelism, static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    for (int i = 0; i < std::max(1, workers); i++) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (first_fault) {
        // configuration faults keep their type so callers can map exit codes
        try {
            std::rethrow_exception(first_fault);
        } catch (const tool_not_found_error&) {
            throw;
        } catch (const auth_missing_error&) {
            throw;
        } catch (const gateway_error&) {
            throw; // backend construction/config problems, not attempt outcomes
        } catch (...) {
        }
        throw harness_error("suite failed: " + fatal_errors.front() +
                            (fatal_errors.size() > 1
                                 ? " (and " + std::to_string(fatal_errors.size() - 1) + " more)"
                                 : ""));
    }

    std::vector<ProblemSummary> summaries;
    for (size_t p = 0; p < problems.size(); p++) {
        ProblemSummary s;
        s.id = problems[p].id;
        s.category_major = problems[p].category_major;
        s.category_minor = problems[p].category_minor;
        for (auto& t : results[p])
            if (!t.iterations.empty()) s.traces.push_back(std::move(t));
        summaries.push_back(std::move(s));
    }

    SuiteReport report =
        aggregate_traces(std::move(summaries), plan.runs_per_problem, plan.k_values, fingerprint);
    write_text_file(plan.out_dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_text_file(plan.out_dir / "report.csv", report_to_csv(report));
    return report;
}

// Rebuilds a SuiteReport from trace files written by run_suite.
inline SuiteReport reaggregate_traces_dir(const std::filesystem::path& traces_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(traces_dir))
        throw harness_error("traces directory does not exist: " + traces_dir.string());

    std::map<std::string, ProblemSummary> by_problem;
    int runs_per_problem = 0;
    std::vector<int> k_values;
    std::string fingerprint;

    std::vector<fs::path> problem_dirs;
    for (const auto& entry : fs::directory_iterator(traces_dir))
        if (entry.is_directory()) problem_dirs.push_back(entry.path());
    std::sort(problem_dirs.begin(), problem_dirs.end());

    for (const auto& dir : problem_dirs) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            nlohmann::json j = nlohmann::json::parse(read_text_file(f));
            AttemptTrace t = trace_from_json(j);
            if (j.contains("suite")) {
                runs_per_problem = j["suite"].value("runs_per_problem", runs_per_problem);
                if (k_values.empty() && j["suite"].contains("k_values"))
                    k_values = j["suite"]["k_values"].get<std::vector<int>>();
                if (fingerprint.empty()) fingerprint = j["suite"].value("fingerprint", "");
            }
            auto& s = by_problem[t.problem_id];
            s.id = t.problem_id;
            s.category_major = t.category_major;
            s.category_minor = t.category_minor;
            if (!t.iterations.empty()) s.traces.push_back(std::move(t));
        }
    }
    if (by_problem.empty()) throw harness_error("no traces found under " + traces_dir.string());
    if (runs_per_problem == 0)
        for (const auto& [id, s] : by_problem)
            runs_per_problem = std::max<int>(runs_per_problem, static_cast<int>(s.traces.size()));
    if (k_values.empty()) k_values = {1, std::min(5, runs_per_problem)};

    std::vector<ProblemSummary> summaries;
    for (auto& [id, s] : by_problem) {
        std::sort(s.traces.begin(), s.traces.end(),
                  [](const AttemptTrace& a, const AttemptTrace& b) { return a.run_index < b.run_index; });
        summaries.push_back(std::move(s));
    }
    return aggregate_traces(std::move(summaries), runs_per_problem, k_values, fingerprint);
}

} // namespace veriloop
