#pragma once

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "minivl_exec.hpp"

namespace minivl {

inline constexpr const char* kArtifactMagic = "MINIVL1";

// Parse + elaborate; throws compile_failure with rendered diagnostics.
inline Design compile_sources(const std::vector<SourceFile>& files) {
    std::vector<Diagnostic> diags;
    std::vector<Module> modules = parse_sources(files, diags);
    if (!diags.empty()) throw compile_failure(std::move(diags));
    Design design = elaborate(modules, diags);
    if (!diags.empty()) throw compile_failure(std::move(diags));
    return design;
}

// The artifact is a validated source archive: everything has been through
// full semantic checking by the time it is written, and the runtime
// re-elaborates it before simulating.
inline void write_artifact(const std::string& path, const std::vector<SourceFile>& files) {
    nlohmann::json j;
    j["files"] = nlohmann::json::array();
    for (const auto& f : files) j["files"].push_back({{"name", f.name}, {"text", f.text}});
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write artifact: " + path);
    out << kArtifactMagic << "\n" << j.dump() << "\n";
}

inline std::vector<SourceFile> read_artifact(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open artifact: " + path);
    std::string magic;
    std::getline(in, magic);
    if (magic != kArtifactMagic)
        throw std::runtime_error(path + " is not a minivl artifact (bad magic)");
    std::stringstream rest;
    rest << in.rdbuf();
    nlohmann::json j = nlohmann::json::parse(rest.str());
    std::vector<SourceFile> files;
    for (const auto& jf : j.at("files"))
        files.push_back({jf.at("name").get<std::string>(), jf.at("text").get<std::string>()});
    return files;
}

inline std::string read_file_or_throw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace minivl
