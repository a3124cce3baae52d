#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "veriloop/corpus.hpp"
#include "veriloop/extract.hpp"
#include "veriloop/gateway.hpp"
#include "veriloop/prompt.hpp"
#include "veriloop/toolchain.hpp"

namespace veriloop {

enum class OutcomeClass { Success, SimulationError, CompileError };

inline const char* outcome_name(OutcomeClass c) {
    switch (c) {
        case OutcomeClass::Success: return "success";
        case OutcomeClass::SimulationError: return "simulation_error";
        case OutcomeClass::CompileError: return "compile_error";
    }
    return "compile_error";
}

inline OutcomeClass outcome_from_name(const std::string& s) {
    if (s == "success") return OutcomeClass::Success;
    if (s == "simulation_error") return OutcomeClass::SimulationError;
    if (s == "compile_error") return OutcomeClass::CompileError;
    throw error("unknown outcome class: " + s);
}

struct LoopConfig {
    ModelConfig model;
    std::optional<ModelConfig> big_model;
    int max_iterations = 10; // feedback rounds after the zero-shot generation
    ContextStrategy strategy = ContextStrategy::Succinct;
};

struct IterationRecord {
    int index = 0;
    std::vector<ChatMessage> messages_sent;
    std::string response;
    std::optional<ExtractedCode> extracted;
    std::optional<CompileOutcome> compile;
    std::optional<SimReport> sim;
    std::string sim_failure_text; // timeout/crash/unparseable output, when sim ran but produced no report
    OutcomeClass outcome_class = OutcomeClass::CompileError;
    long input_tokens = 0;
    long output_tokens = 0;
    std::string model_used;
};

struct AttemptTrace {
    std::string problem_id;
    std::string category_major;
    std::string category_minor;
    int run_index = 0;
    std::string model_name;
    std::string big_model_name; // empty when no ensemble
    double model_input_rate = 0, model_output_rate = 0;
    double big_input_rate = 0, big_output_rate = 0;
    int max_iterations = 10;
    ContextStrategy strategy = ContextStrategy::Succinct;
    std::string compiler_command, runtime_command;
    std::vector<IterationRecord> iterations;
    OutcomeClass final_class = OutcomeClass::CompileError;
    int iterations_used = 0;
    bool escalated = false;
    std::chrono::milliseconds wall_time{0};
    std::string aborted_reason; // nonempty when a backend failure cut the attempt short
};

class loop_error : public error {
public:
    using error::error;
};

class inconsistent_arguments_error : public loop_error {
public:
    using loop_error::loop_error;
};

// Three-way outcome classification. Un-extractable responses land in the
// compile-error bucket; the trace keeps the finer-grained cause.
inline OutcomeClass classify(const std::optional<ExtractedCode>& extracted,
                             const std::optional<CompileOutcome>& compile_outcome,
                             const std::optional<SimReport>& sim) {
    if (!extracted) {
        if (compile_outcome || sim)
            throw inconsistent_arguments_error("compile/sim present without extracted code");
        return OutcomeClass::CompileError;
    }
    if (!compile_outcome)
        throw inconsistent_arguments_error("extracted code present but compile absent");
    if (!compile_outcome->success) {
        if (sim) throw inconsistent_arguments_error("sim present after failed compile");
        return OutcomeClass::CompileError;
    }
    if (!sim)
        throw inconsistent_arguments_error("sim absent after successful compile");
    return sim->all_passed ? OutcomeClass::Success : OutcomeClass::SimulationError;
}

namespace detail {

inline std::string sanitize_for_path(const std::string& s) {
    std::string out;
    for (char c : s)
        out += (is_word_char(c) || c == '-' || c == '.') ? c : '_';
    return out;
}

} // namespace detail

// Runs one full generate -> extract -> compile -> simulate -> feedback
// attempt, up to n feedback rounds plus an optional single big-model
// escalation. tool_not_found_error propagates (configuration fault); backend
// failures end the attempt with the trace preserved.
inline AttemptTrace run_attempt(const Problem& problem,
                                const LoopConfig& config,
                                const ToolchainConfig& toolchain,
                                ChatBackend& small_backend,
                                ChatBackend* big_backend = nullptr,
                                const std::string& attempt_label = "attempt") {
    if (config.max_iterations < 0) throw loop_error("max_iterations must be >= 0");
    if (config.big_model && config.big_model->name == config.model.name)
        throw loop_error("big_model must differ from the iterating model");
    if (config.big_model && !big_backend)
        throw loop_error("big_model configured but no big backend supplied");
    if (config.model.completion_only && config.max_iterations > 0)
        throw loop_error("completion-only models support zero-shot runs only (set iterations to 0)");
    if (config.big_model && config.big_model->completion_only)
        throw loop_error("completion-only models cannot serve as the escalation target");

    AttemptTrace trace;
    trace.problem_id = problem.id;
    trace.category_major = problem.category_major;
    trace.category_minor = problem.category_minor;
    trace.model_name = config.model.name;
    trace.model_input_rate = config.model.input_rate;
    trace.model_output_rate = config.model.output_rate;
    if (config.big_model) {
        trace.big_model_name = config.big_model->name;
        trace.big_input_rate = config.big_model->input_rate;
        trace.big_output_rate = config.big_model->output_rate;
    }
    trace.max_iterations = config.max_iterations;
    trace.strategy = config.strategy;
    trace.compiler_command = toolchain.compiler_command;
    trace.runtime_command = toolchain.runtime_command;

    auto start = std::chrono::steady_clock::now();
    auto finish = [&](void) {
        trace.wall_time = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start);
        trace.iterations_used = static_cast<int>(trace.iterations.size());
        if (!trace.iterations.empty()) trace.final_class = trace.iterations.back().outcome_class;
    };

    std::vector<ChatMessage> last_messages;
    std::string last_response;
    FeedbackPayload last_payload{FeedbackKind::ParseFailure, "", false};

    const std::string label = detail::sanitize_for_path(attempt_label);
    int total_rounds = config.max_iterations + 1; // zero-shot counts as round one

    for (int round = 0; round <= total_rounds; round++) {
        bool escalation = round == total_rounds;
        if (escalation && (!config.big_model || trace.iterations.empty())) break;

        IterationRecord rec;
        rec.index = round;
        const ModelConfig& model_cfg = escalation ? *config.big_model : config.model;
        ChatBackend& backend = escalation ? *big_backend : small_backend;
        rec.model_used = model_cfg.name;

        // The escalation query always gets the succinct window: the latest
        // module and its errors, nothing else.
        try {
            if (round == 0)
                rec.messages_sent = initial_messages(problem);
            else
                rec.messages_sent = next_messages(escalation ? ContextStrategy::Succinct : config.strategy,
                                                  last_messages, last_response, last_payload);
            LLMResponse response = backend.complete(rec.messages_sent, model_cfg);
            rec.response = response.text;
            rec.input_tokens = response.input_tokens;
            rec.output_tokens = response.output_tokens;
        } catch (const auth_missing_error&) {
            throw; // configuration fault, not an attempt outcome
        } catch (const gateway_error& e) {
            trace.aborted_reason = e.what();
            finish();
            return trace;
        }

        rec.extracted = extract(rec.response);
        if (!rec.extracted) {
            last_payload = make_parse_failure_feedback();
            rec.outcome_class = OutcomeClass::CompileError;
        } else {
            std::string attempt_id = label + "/i" + std::to_string(round);
            rec.compile = compile(rec.extracted->source, problem.testbench_source, toolchain, attempt_id);
            if (!rec.compile->success) {
                last_payload = make_compile_feedback(rec.compile->diagnostics);
                rec.outcome_class = OutcomeClass::CompileError;
            } else {
                try {
                    rec.sim = simulate(rec.compile->artifact, toolchain);
                    if (rec.sim->all_passed) {
                        rec.outcome_class = OutcomeClass::Success;
                    } else {
                        last_payload = make_sim_feedback(rec.sim->raw_output);
                        rec.outcome_class = OutcomeClass::SimulationError;
                    }
                } catch (const sim_timeout_error& e) {
                    rec.sim_failure_text = e.partial_output + "\n" + e.what();
                    rec.outcome_class = OutcomeClass::SimulationError;
                    last_payload = make_sim_feedback(rec.sim_failure_text);
                } catch (const sim_crash_error& e) {
                    rec.sim_failure_text = e.output + "\n" + e.what();
                    rec.outcome_class = OutcomeClass::SimulationError;
                    last_payload = make_sim_feedback(rec.sim_failure_text);
                } catch (const no_summary_error& e) {
                    rec.sim_failure_text = e.output + "\n(no test summary found in simulation output)";
                    rec.outcome_class = OutcomeClass::SimulationError;
                    last_payload = make_sim_feedback(rec.sim_failure_text);
                }
            }
        }

        last_messages = rec.messages_sent;
        last_response = rec.response.empty() ? std::string("(empty response)") : rec.response;
        bool success = rec.outcome_class == OutcomeClass::Success;
        if (escalation) trace.escalated = true;
        trace.iterations.push_back(std::move(rec));
        if (success) break;
    }

    finish();
    return trace;
}

// --- trace serialization -----------------------------------------------

inline nlohmann::json sim_report_to_json(const SimReport& s) {
    nlohmann::json jm = nlohmann::json::array();
    for (const auto& rec : s.mismatches)
        jm.push_back({{"position_kind", rec.position_kind},
                      {"position", rec.position},
                      {"inputs", rec.inputs},
                      {"generated", rec.generated},
                      {"reference", rec.reference}});
    return {{"passed_tests", s.passed_tests}, {"mismatches", jm},
            {"mismatch_count", s.mismatch_count}, {"total_tests", s.total_tests},
            {"raw_output", s.raw_output}, {"all_passed", s.all_passed}};
}

inline SimReport sim_report_from_json(const nlohmann::json& j) {
    SimReport s;
    s.passed_tests = j.at("passed_tests").get<std::vector<long>>();
    for (const auto& jm : j.at("mismatches")) {
        MismatchRecord rec;
        rec.position_kind = jm.at("position_kind").get<std::string>();
        rec.position = jm.at("position").get<long>();
        rec.inputs = jm.at("inputs").get<std::vector<std::string>>();
        rec.generated = jm.at("generated").get<std::vector<std::string>>();
        rec.reference = jm.at("reference").get<std::vector<std::string>>();
        s.mismatches.push_back(std::move(rec));
    }
    s.mismatch_count = j.at("mismatch_count").get<long>();
    s.total_tests = j.at("total_tests").get<long>();
    s.raw_output = j.at("raw_output").get<std::string>();
    s.all_passed = j.at("all_passed").get<bool>();
    return s;
}

inline nlohmann::json trace_to_json(const AttemptTrace& t) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["problem_id"] = t.problem_id;
    j["category_major"] = t.category_major;
    j["category_minor"] = t.category_minor;
    j["run_index"] = t.run_index;
    j["config"] = {{"model", t.model_name},
                   {"big_model", t.big_model_name},
                   {"model_input_rate", t.model_input_rate},
                   {"model_output_rate", t.model_output_rate},
                   {"big_input_rate", t.big_input_rate},
                   {"big_output_rate", t.big_output_rate},
                   {"max_iterations", t.max_iterations},
                   {"strategy", t.strategy == ContextStrategy::Succinct ? "succinct" : "full"},
                   {"compiler_command", t.compiler_command},
                   {"runtime_command", t.runtime_command}};
    nlohmann::json jits = nlohmann::json::array();
    for (const auto& it : t.iterations) {
        nlohmann::json ji;
        ji["index"] = it.index;
        ji["model_used"] = it.model_used;
        nlohmann::json jmsgs = nlohmann::json::array();
        for (const auto& m : it.messages_sent)
            jmsgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
        ji["messages_sent"] = std::move(jmsgs);
        ji["response"] = it.response;
        if (it.extracted)
            ji["extracted"] = {{"source", it.extracted->source},
                               {"method", it.extracted->method == ExtractMethod::FencedBlock
                                              ? "fenced_block" : "module_span"},
                               {"block_count", it.extracted->block_count}};
        else
            ji["extracted"] = nullptr;
        if (it.compile)
            ji["compile"] = {{"success", it.compile->success},
                             {"diagnostics", it.compile->diagnostics},
                             {"artifact", it.compile->artifact.string()}};
        else
            ji["compile"] = nullptr;
        ji["sim"] = it.sim ? sim_report_to_json(*it.sim) : nlohmann::json(nullptr);
        ji["sim_failure_text"] = it.sim_failure_text;
        ji["outcome_class"] = outcome_name(it.outcome_class);
        ji["input_tokens"] = it.input_tokens;
        ji["output_tokens"] = it.output_tokens;
        jits.push_back(std::move(ji));
    }
    j["iterations"] = std::move(jits);
    j["final_class"] = outcome_name(t.final_class);
    j["iterations_used"] = t.iterations_used;
    j["escalated"] = t.escalated;
    j["wall_time_ms"] = t.wall_time.count();
    j["aborted_reason"] = t.aborted_reason;
    return j;
}

inline AttemptTrace trace_from_json(const nlohmann::json& j) {
    AttemptTrace t;
    t.problem_id = j.at("problem_id").get<std::string>();
    t.category_major = j.value("category_major", "");
    t.category_minor = j.value("category_minor", "");
    t.run_index = j.value("run_index", 0);
    const auto& jc = j.at("config");
    t.model_name = jc.at("model").get<std::string>();
    t.big_model_name = jc.value("big_model", "");
    t.model_input_rate = jc.value("model_input_rate", 0.0);
    t.model_output_rate = jc.value("model_output_rate", 0.0);
    t.big_input_rate = jc.value("big_input_rate", 0.0);
    t.big_output_rate = jc.value("big_output_rate", 0.0);
    t.max_iterations = jc.value("max_iterations", 10);
    t.strategy = jc.value("strategy", "succinct") == std::string("full")
                     ? ContextStrategy::FullContext : ContextStrategy::Succinct;
    t.compiler_command = jc.value("compiler_command", "");
    t.runtime_command = jc.value("runtime_command", "");
    for (const auto& ji : j.at("iterations")) {
        IterationRecord it;
        it.index = ji.at("index").get<int>();
        it.model_used = ji.at("model_used").get<std::string>();
        for (const auto& jm : ji.at("messages_sent")) {
            Role role = Role::User;
            std::string rn = jm.at("role").get<std::string>();
            if (rn == "system") role = Role::System;
            else if (rn == "assistant") role = Role::Assistant;
            it.messages_sent.push_back({role, jm.at("content").get<std::string>()});
        }
        it.response = ji.at("response").get<std::string>();
        if (!ji.at("extracted").is_null()) {
            const auto& je = ji.at("extracted");
            it.extracted = ExtractedCode{
                je.at("source").get<std::string>(),
                je.at("method").get<std::string>() == "fenced_block" ? ExtractMethod::FencedBlock
                                                                     : ExtractMethod::ModuleSpan,
                je.at("block_count").get<int>()};
        }
        if (!ji.at("compile").is_null()) {
            const auto& jco = ji.at("compile");
            CompileOutcome co;
            co.success = jco.at("success").get<bool>();
            co.diagnostics = jco.at("diagnostics").get<std::string>();
            co.artifact = jco.at("artifact").get<std::string>();
            it.compile = std::move(co);
        }
        if (!ji.at("sim").is_null()) it.sim = sim_report_from_json(ji.at("sim"));
        it.sim_failure_text = ji.value("sim_failure_text", "");
        it.outcome_class = outcome_from_name(ji.at("outcome_class").get<std::string>());
        it.input_tokens = ji.at("input_tokens").get<long>();
        it.output_tokens = ji.at("output_tokens").get<long>();
        t.iterations.push_back(std::move(it));
    }
    t.final_class = outcome_from_name(j.at("final_class").get<std::string>());
    t.iterations_used = j.at("iterations_used").get<int>();
    t.escalated = j.at("escalated").get<bool>();
    t.wall_time = std::chrono::milliseconds(j.value("wall_time_ms", 0));
    t.aborted_reason = j.value("aborted_reason", "");
    return t;
}

// Dollar cost of one attempt at the rates recorded in its trace.
inline double trace_cost(const AttemptTrace& t) {
    double total = 0;
    for (const auto& it : t.iterations) {
        bool big = !t.big_model_name.empty() && it.model_used == t.big_model_name;
        double in_rate = big ? t.big_input_rate : t.model_input_rate;
        double out_rate = big ? t.big_output_rate : t.model_output_rate;
        total += it.input_tokens / 1000.0 * in_rate + it.output_tokens / 1000.0 * out_rate;
    }
    return total;
}

} // namespace veriloop
