#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "veriloop/subprocess.hpp"
#include "veriloop/util.hpp"

namespace veriloop {

struct ToolchainConfig {
    std::string compiler_command = "iverilog";
    std::string runtime_command = "vvp";
    std::chrono::milliseconds compile_timeout{60000};
    std::chrono::milliseconds sim_timeout{60000};
    std::filesystem::path workdir_root = "work";
};

struct CompileOutcome {
    bool success = false;
    std::string diagnostics;          // compiler stdout+stderr, arrival order
    std::filesystem::path artifact;   // set iff success
};

struct MismatchRecord {
    std::string position_kind; // "clk", "index", ...
    long position = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> generated;
    std::vector<std::string> reference;

    bool operator==(const MismatchRecord&) const = default;
};

struct SimReport {
    std::vector<long> passed_tests;
    std::vector<MismatchRecord> mismatches;
    long mismatch_count = 0;
    long total_tests = 0;
    std::string raw_output;
    bool all_passed = false;
};

class toolchain_error : public error {
public:
    using error::error;
};

class tool_not_found_error : public toolchain_error {
public:
    explicit tool_not_found_error(const std::string& cmd)
        : toolchain_error("tool not found: " + cmd), command(cmd) {}
    std::string command;
};

class sim_timeout_error : public toolchain_error {
public:
    sim_timeout_error(std::string partial, std::chrono::milliseconds limit)
        : toolchain_error("simulation timed out after " + std::to_string(limit.count()) + " ms"),
          partial_output(std::move(partial)) {}
    std::string partial_output;
};

class sim_crash_error : public toolchain_error {
public:
    sim_crash_error(std::string output_text, int exit_code)
        : toolchain_error("simulation runtime exited with status " + std::to_string(exit_code) +
                          " and no parseable summary"),
          output(std::move(output_text)), exit_code(exit_code) {}
    std::string output;
    int exit_code;
};

class no_summary_error : public toolchain_error {
public:
    explicit no_summary_error(std::string output_text)
        : toolchain_error("simulation output has no summary line"), output(std::move(output_text)) {}
    std::string output;
};

namespace simgrammar {

inline const std::regex& passed_re() {
    static const std::regex re(R"(^Test (\d+) passed!\s*$)");
    return re;
}
inline const std::regex& mismatch_re() {
    static const std::regex re(
        R"(^Mismatch at (\w+) (\d+): Inputs = \[([^\]]*)\], Generated = \[([^\]]*)\], Reference = \[([^\]]*)\]\s*$)");
    return re;
}
inline const std::regex& summary_re() {
    static const std::regex re(R"(^(\d+) mismatches out of (\d+) total tests\.\s*$)");
    return re;
}
inline const std::regex& all_passed_re() {
    static const std::regex re(R"(^All Tests passed!.*$)");
    return re;
}

inline std::vector<std::string> split_vector_list(const std::string& inner) {
    std::vector<std::string> items;
    if (trim(inner).empty()) return items;
    size_t pos = 0;
    while (pos <= inner.size()) {
        size_t comma = inner.find(", ", pos);
        if (comma == std::string::npos) {
            items.push_back(trim(inner.substr(pos)));
            break;
        }
        items.push_back(trim(inner.substr(pos, comma - pos)));
        pos = comma + 2;
    }
    return items;
}

} // namespace simgrammar

// Parses testbench output. Recognized lines:
//   Test <n> passed!
//   Mismatch at <word> <n>: Inputs = [...], Generated = [...], Reference = [...]
//   <n> mismatches out of <n> total tests.
//   All Tests passed! [trailing notice]
// Anything else stays in raw_output untouched. Throws no_summary_error when
// neither a summary nor an all-passed line exists.
inline SimReport parse_sim_output(const std::string& text) {
    SimReport report;
    report.raw_output = text;

    bool saw_summary = false;
    bool saw_all_passed = false;
    for (const auto& line : split_lines(text)) {
        std::smatch m;
        if (std::regex_match(line, m, simgrammar::passed_re())) {
            report.passed_tests.push_back(std::stol(m[1]));
        } else if (std::regex_match(line, m, simgrammar::mismatch_re())) {
            MismatchRecord rec;
            rec.position_kind = m[1];
            rec.position = std::stol(m[2]);
            rec.inputs = simgrammar::split_vector_list(m[3]);
            rec.generated = simgrammar::split_vector_list(m[4]);
            rec.reference = simgrammar::split_vector_list(m[5]);
            // Generated/reference must pair up; otherwise the line is noise.
            if (rec.generated.size() == rec.reference.size())
                report.mismatches.push_back(std::move(rec));
        } else if (std::regex_match(line, m, simgrammar::summary_re())) {
            report.mismatch_count = std::stol(m[1]);
            report.total_tests = std::stol(m[2]);
            saw_summary = true;
        } else if (std::regex_match(line, m, simgrammar::all_passed_re())) {
            saw_all_passed = true;
        }
    }

    if (saw_all_passed) {
        report.all_passed = true;
        report.mismatch_count = 0;
        if (!saw_summary) report.total_tests = static_cast<long>(report.passed_tests.size());
    } else if (saw_summary) {
        report.all_passed = report.mismatch_count == 0;
    } else {
        throw no_summary_error(text);
    }
    return report;
}

// Writes module.v and tb.v into a fresh directory under workdir_root and
// invokes `<compiler_command> -o <artifact> module.v tb.v`. attempt_id must
// be unique per compile; directories are never reused.
inline CompileOutcome compile(const std::string& module_source,
                              const std::string& testbench_source,
                              const ToolchainConfig& config,
                              const std::string& attempt_id) {
    namespace fs = std::filesystem;
    if (module_source.empty() || testbench_source.empty())
        throw toolchain_error("compile: empty source");

    fs::path dir = config.workdir_root / attempt_id;
    if (fs::exists(dir))
        throw toolchain_error("compile: working directory already used: " + dir.string());
    fs::create_directories(dir);
    write_text_file(dir / "module.v", module_source);
    write_text_file(dir / "tb.v", testbench_source);

    fs::path artifact = dir / "sim.out";
    std::vector<std::string> argv = split_command(config.compiler_command);
    if (argv.empty()) throw toolchain_error("compile: empty compiler command");
    argv.push_back("-o");
    argv.push_back(artifact.filename().string());
    argv.push_back("module.v");
    argv.push_back("tb.v");

    ProcessResult proc = run_process(argv, dir, config.compile_timeout, /*merge_output=*/true);
    if (proc.exec_failed) throw tool_not_found_error(config.compiler_command);

    CompileOutcome outcome;
    if (proc.timed_out) {
        outcome.success = false;
        outcome.diagnostics = "compilation timed out after " +
                              std::to_string(config.compile_timeout.count()) + " ms";
        return outcome;
    }
    outcome.diagnostics = proc.out;
    outcome.success = proc.exit_code == 0;
    if (outcome.success) outcome.artifact = artifact;
    return outcome;
}

// Runs `<runtime_command> <artifact>` and parses its stdout. A nonzero exit
// with a parseable summary still counts as a report ($fatal-style runtimes);
// without one it is a crash.
inline SimReport simulate(const std::filesystem::path& artifact, const ToolchainConfig& config) {
    namespace fs = std::filesystem;
    if (!fs::exists(artifact))
        throw toolchain_error("simulate: artifact does not exist: " + artifact.string());

    std::vector<std::string> argv = split_command(config.runtime_command);
    if (argv.empty()) throw toolchain_error("simulate: empty runtime command");
    argv.push_back(artifact.filename().string());

    ProcessResult proc = run_process(argv, artifact.parent_path(), config.sim_timeout,
                                     /*merge_output=*/false);
    if (proc.exec_failed) throw tool_not_found_error(config.runtime_command);
    if (proc.timed_out) throw sim_timeout_error(proc.out + proc.err, config.sim_timeout);

    try {
        return parse_sim_output(proc.out);
    } catch (const no_summary_error&) {
        if (proc.exit_code != 0) throw sim_crash_error(proc.out + proc.err, proc.exit_code);
        throw;
    }
}

} // namespace veriloop
