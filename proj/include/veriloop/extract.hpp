#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "veriloop/util.hpp"

namespace veriloop {

enum class ExtractMethod { FencedBlock, ModuleSpan };

struct ExtractedCode {
    std::string source;
    ExtractMethod method;
    int block_count = 1;
};

namespace detail {

struct Fence {
    size_t begin; // first content char
    size_t end;   // one past last content char
};

// Pairs up ``` markers in order of appearance: 1st opens, 2nd closes, etc.
// The remainder of the opening fence line is treated as an info string and
// dropped when it is a single word (a language tag).
inline std::vector<Fence> find_fenced_blocks(std::string_view text) {
    std::vector<Fence> blocks;
    size_t pos = 0;
    while (true) {
        size_t open = text.find("```", pos);
        if (open == std::string_view::npos) break;
        size_t content = open + 3;
        size_t close = text.find("```", content);
        if (close == std::string_view::npos) break;
        blocks.push_back({content, close});
        pos = close + 3;
    }
    return blocks;
}

inline std::string strip_language_tag(std::string_view block) {
    size_t nl = block.find('\n');
    if (nl != std::string_view::npos) {
        std::string first_line = trim(block.substr(0, nl));
        bool single_word = !first_line.empty() &&
                           first_line.find_first_of(" \t") == std::string::npos &&
                           first_line.find('(') == std::string::npos &&
                           first_line.find(';') == std::string::npos;
        if (single_word) return std::string(block.substr(nl + 1));
        if (first_line.empty()) return std::string(block.substr(nl + 1));
    }
    return std::string(block);
}

inline bool has_module_pair(std::string_view text) {
    size_t m = find_token(text, "module");
    if (m == std::string_view::npos) return false;
    return find_token(text, "endmodule", m) != std::string_view::npos;
}

} // namespace detail

// Pulls the candidate Verilog out of a raw LLM response. Fenced blocks win;
// otherwise the text is scanned for module...endmodule spans. All qualifying
// blocks/spans are concatenated in order of appearance. Returns nullopt when
// the response contains no module at all.
inline std::optional<ExtractedCode> extract(std::string_view response) {
    // Fenced route: every block holding a module...endmodule pair counts.
    std::vector<std::string> parts;
    for (const auto& fence : detail::find_fenced_blocks(response)) {
        std::string content =
            detail::strip_language_tag(response.substr(fence.begin, fence.end - fence.begin));
        if (detail::has_module_pair(content)) parts.push_back(trim(content));
    }
    if (!parts.empty()) {
        std::string source = parts[0];
        for (size_t i = 1; i < parts.size(); i++) {
            source += "\n\n";
            source += parts[i];
        }
        return ExtractedCode{std::move(source), ExtractMethod::FencedBlock,
                             static_cast<int>(parts.size())};
    }

    // Raw route: spans from a `module` token to the next `endmodule` token.
    std::vector<std::string> spans;
    size_t pos = 0;
    while (true) {
        size_t m = find_token(response, "module", pos);
        if (m == std::string_view::npos) break;
        size_t e = find_token(response, "endmodule", m);
        if (e == std::string_view::npos) break;
        size_t span_end = e + std::string_view("endmodule").size();
        spans.emplace_back(response.substr(m, span_end - m));
        pos = span_end;
    }
    if (!spans.empty()) {
        std::string source = spans[0];
        for (size_t i = 1; i < spans.size(); i++) {
            source += "\n\n";
            source += spans[i];
        }
        return ExtractedCode{std::move(source), ExtractMethod::ModuleSpan,
                             static_cast<int>(spans.size())};
    }
    return std::nullopt;
}

} // namespace veriloop
