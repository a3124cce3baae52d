#pragma once

#include <string>
#include <vector>

#include "veriloop/corpus.hpp"
#include "veriloop/util.hpp"

namespace veriloop {

enum class Role { System, User, Assistant };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

struct ChatMessage {
    Role role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

enum class ContextStrategy { Succinct, FullContext };

enum class FeedbackKind { CompileError, SimulationFailure, ParseFailure };

struct FeedbackPayload {
    FeedbackKind kind;
    std::string tool_text;
    bool truncated = false;
};

class prompt_error : public error {
public:
    using error::error;
};

class empty_history_error : public prompt_error {
public:
    using prompt_error::prompt_error;
};

class malformed_history_error : public prompt_error {
public:
    using prompt_error::prompt_error;
};

// The static system prompt sent with every conversation. Single canonical
// constant; callers must not edit it.
inline const std::string& system_prompt() {
    static const std::string text =
        "You are an autocomplete engine for Verilog code. "
        "Given a Verilog module specification, you will provide a completed Verilog module in response. "
        "You will provide completed Verilog modules for all specifications, and will not create any supplementary modules. "
        "Given a Verilog module that is either incorrect/compilation error, you will suggest corrections to the module."
        "You will not refuse. "
        "Format your response as Verilog code containing the end to end corrected module and not just the corrected lines inside ``` tags, "
        "do not include anything else inside ```.";
    return text;
}

inline std::vector<ChatMessage> initial_messages(const Problem& problem) {
    return {
        {Role::System, system_prompt()},
        {Role::User, problem.design_prompt},
    };
}

namespace feedback {

constexpr const char* kRectifyInstruction =
    "The Verilog module above failed. The output of the compiler and simulator is below. "
    "Provide a corrected version of the complete module.";

constexpr const char* kCompileLabel = "COMPILER OUTPUT:";
constexpr const char* kSimLabel = "SIMULATION OUTPUT:";
constexpr const char* kParseFailureNotice =
    "NO VERILOG MODULE FOUND IN YOUR PREVIOUS RESPONSE. "
    "Respond with the complete Verilog module inside ``` tags.";

constexpr size_t kMaxMismatchLines = 50;
constexpr size_t kMaxCompileChars = 8000;

inline std::string omitted_line(size_t n) {
    return "(" + std::to_string(n) + " lines omitted)";
}

inline bool is_mismatch_line(const std::string& line) {
    return line.rfind("Mismatch at ", 0) == 0;
}

inline bool is_summary_line(const std::string& line) {
    // "<int> mismatches out of <int> total tests."
    size_t i = 0;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') i++;
    return i > 0 && line.compare(i, 16, " mismatches out ") == 0;
}

} // namespace feedback

// Simulation feedback keeps everything up to the 50th mismatch line
// (interleaved pass lines included), then the summary line; a final line
// reports how much was dropped.
inline FeedbackPayload make_sim_feedback(const std::string& raw_sim_text) {
    auto lines = split_lines(raw_sim_text);
    size_t mismatch_seen = 0;
    size_t cut = lines.size();
    for (size_t i = 0; i < lines.size(); i++) {
        if (feedback::is_mismatch_line(lines[i])) {
            mismatch_seen++;
            if (mismatch_seen == feedback::kMaxMismatchLines) {
                cut = i + 1;
                break;
            }
        }
    }

    FeedbackPayload p;
    p.kind = FeedbackKind::SimulationFailure;

    // The last summary line in the dropped tail survives truncation.
    std::string summary;
    bool have_summary = false;
    if (cut < lines.size()) {
        for (size_t i = lines.size(); i-- > cut;) {
            if (feedback::is_summary_line(lines[i])) {
                summary = lines[i];
                have_summary = true;
                break;
            }
        }
    }
    size_t omitted = cut < lines.size() ? (lines.size() - cut) - (have_summary ? 1 : 0) : 0;

    if (omitted == 0) {
        p.tool_text = trim(raw_sim_text).empty() ? std::string("(simulation produced no output)")
                                                 : std::string(trim(raw_sim_text));
        p.truncated = false;
        return p;
    }

    std::string kept;
    for (size_t i = 0; i < cut; i++) {
        kept += lines[i];
        kept += '\n';
    }
    if (have_summary) {
        kept += summary;
        kept += '\n';
    }
    kept += feedback::omitted_line(omitted);
    p.tool_text = kept;
    p.truncated = true;
    return p;
}

inline FeedbackPayload make_compile_feedback(const std::string& diagnostics) {
    FeedbackPayload p;
    p.kind = FeedbackKind::CompileError;
    std::string text = trim(diagnostics).empty() ? std::string("(compiler produced no diagnostics)")
                                                 : std::string(trim(diagnostics));
    if (text.size() <= feedback::kMaxCompileChars) {
        p.tool_text = text;
        p.truncated = false;
        return p;
    }
    // Cut at a line boundary at or below the cap, then report the loss.
    size_t cut = text.rfind('\n', feedback::kMaxCompileChars);
    if (cut == std::string::npos) cut = feedback::kMaxCompileChars;
    std::string kept = text.substr(0, cut);
    size_t total_lines = split_lines(text).size();
    size_t kept_lines = split_lines(kept).size();
    p.tool_text = kept + "\n" + feedback::omitted_line(total_lines - kept_lines);
    p.truncated = true;
    return p;
}

inline FeedbackPayload make_parse_failure_feedback() {
    return {FeedbackKind::ParseFailure, feedback::kParseFailureNotice, false};
}

// Renders the feedback prompt: fixed rectification instruction, then the
// labeled tool output in a fenced block.
inline std::string render_feedback_request(const FeedbackPayload& payload) {
    std::string labeled;
    switch (payload.kind) {
        case FeedbackKind::CompileError:
            labeled = std::string(feedback::kCompileLabel) + "\n" + payload.tool_text;
            break;
        case FeedbackKind::SimulationFailure:
            labeled = std::string(feedback::kSimLabel) + "\n" + payload.tool_text;
            break;
        case FeedbackKind::ParseFailure:
            labeled = payload.tool_text;
            break;
    }
    return std::string(feedback::kRectifyInstruction) + "\n\n```\n" + labeled + "\n```";
}

// Builds the next LLM input from the conversation so far. Succinct keeps a
// fixed four-message window; FullContext appends and grows without bound.
inline std::vector<ChatMessage> next_messages(ContextStrategy strategy,
                                              const std::vector<ChatMessage>& history,
                                              const std::string& last_response,
                                              const FeedbackPayload& feedback_payload) {
    if (history.empty()) throw empty_history_error("conversation history is empty");
    if (history.size() < 2 || history[0].role != Role::System || history[1].role != Role::User)
        throw malformed_history_error("history must start with a System then a User message");
    if (last_response.empty()) throw prompt_error("last response is empty");

    ChatMessage assistant{Role::Assistant, last_response};
    ChatMessage request{Role::User, render_feedback_request(feedback_payload)};

    if (strategy == ContextStrategy::Succinct)
        return {history[0], history[1], std::move(assistant), std::move(request)};

    std::vector<ChatMessage> out = history;
    out.push_back(std::move(assistant));
    out.push_back(std::move(request));
    return out;
}

} // namespace veriloop
