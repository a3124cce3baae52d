#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "veriloop/util.hpp"

namespace veriloop {

// One benchmark unit: a natural-language design prompt with a module
// skeleton, plus a self-checking testbench that instantiates the module.
struct Problem {
    std::string id;
    std::string category_major;
    std::string category_minor;
    std::string design_prompt;
    std::string testbench_source;
    std::string top_module_name = "top_module";
};

class corpus_error : public error {
public:
    using error::error;
};

class missing_file_error : public corpus_error {
public:
    explicit missing_file_error(const std::string& filename)
        : corpus_error("missing file: " + filename), filename(filename) {}
    std::string filename;
};

class empty_prompt_error : public corpus_error {
public:
    using corpus_error::corpus_error;
};

class invalid_meta_error : public corpus_error {
public:
    invalid_meta_error(const std::string& msg, int line)
        : corpus_error(msg + " (line " + std::to_string(line) + ")"), line(line) {}
    int line;
};

class empty_corpus_error : public corpus_error {
public:
    using corpus_error::corpus_error;
};

namespace detail {

// Meta files are lines of key=value; '#' starts a comment, blanks are ignored.
inline void apply_meta(const std::string& text, Problem& p) {
    auto lines = split_lines(text);
    for (size_t i = 0; i < lines.size(); i++) {
        std::string line = trim(lines[i]);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw invalid_meta_error("malformed meta line, expected key=value", static_cast<int>(i + 1));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw invalid_meta_error("empty key in meta line", static_cast<int>(i + 1));
        if (key == "category_major") p.category_major = value;
        else if (key == "category_minor") p.category_minor = value;
        else if (key == "top_module") p.top_module_name = value;
        else throw invalid_meta_error("unknown meta key '" + key + "'", static_cast<int>(i + 1));
    }
}

} // namespace detail

// Loads <dir>/prompt.v and <dir>/tb.v (plus an optional `meta` file) into a
// Problem. All type invariants are checked here, not lazily.
inline Problem load_problem(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw missing_file_error(dir.string());

    Problem p;
    p.id = dir.filename().string();
    if (p.id.empty()) p.id = fs::absolute(dir).parent_path().filename().string();

    auto prompt_path = dir / "prompt.v";
    auto tb_path = dir / "tb.v";
    if (!fs::exists(prompt_path)) throw missing_file_error("prompt.v");
    if (!fs::exists(tb_path)) throw missing_file_error("tb.v");

    p.design_prompt = read_text_file(prompt_path);
    p.testbench_source = read_text_file(tb_path);
    if (trim(p.design_prompt).empty())
        throw empty_prompt_error("prompt.v is empty: " + prompt_path.string());

    auto meta_path = dir / "meta";
    if (fs::exists(meta_path)) detail::apply_meta(read_text_file(meta_path), p);

    if (!contains_token(p.design_prompt, "module"))
        throw corpus_error("prompt.v contains no module skeleton: " + prompt_path.string());
    if (!contains_token(p.testbench_source, "module"))
        throw corpus_error("tb.v contains no module: " + tb_path.string());
    return p;
}

struct CorpusLoadError {
    std::string directory;
    std::string message;
};

// Loads every immediate subdirectory of `root` that parses as a problem,
// sorted by id. Per-directory failures are collected, not fatal; an empty
// result is.
inline std::vector<Problem> load_corpus(const std::filesystem::path& root,
                                        std::vector<CorpusLoadError>* errors = nullptr) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw missing_file_error(root.string());

    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());

    std::vector<Problem> problems;
    for (const auto& dir : dirs) {
        try {
            problems.push_back(load_problem(dir));
        } catch (const error& e) {
            if (errors) errors->push_back({dir.filename().string(), e.what()});
        }
    }
    std::sort(problems.begin(), problems.end(),
              [](const Problem& a, const Problem& b) { return a.id < b.id; });
    for (size_t i = 1; i < problems.size(); i++)
        if (problems[i].id == problems[i - 1].id)
            throw corpus_error("duplicate problem id: " + problems[i].id);
    if (problems.empty())
        throw empty_corpus_error("no loadable problems under " + root.string());
    return problems;
}

} // namespace veriloop
