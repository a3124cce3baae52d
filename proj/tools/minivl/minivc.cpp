// minivc: compile Verilog sources into a minivl simulation artifact.
// Usage: minivc -o <artifact> <source.v> [more.v ...]

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "minivl.hpp"

int main(int argc, char** argv) {
    std::string out_path;
    std::vector<std::string> sources;
    for (int i = 1; i < argc; i++) {
        std::string arg = argv[i];
        if (arg == "-o") {
            if (i + 1 >= argc) {
                std::fprintf(stderr, "minivc: -o needs an argument\n");
                return 64;
            }
            out_path = argv[++i];
        } else if (arg == "--help" || arg == "-h") {
            std::printf("usage: minivc -o <artifact> <source.v> [more.v ...]\n");
            return 0;
        } else {
            sources.push_back(arg);
        }
    }
    if (out_path.empty() || sources.empty()) {
        std::fprintf(stderr, "usage: minivc -o <artifact> <source.v> [more.v ...]\n");
        return 64;
    }

    std::vector<minivl::SourceFile> files;
    try {
        for (const auto& path : sources)
            files.push_back({path, minivl::read_file_or_throw(path)});
    } catch (const std::exception& e) {
        std::fprintf(stderr, "minivc: %s\n", e.what());
        return 1;
    }

    try {
        minivl::compile_sources(files);
    } catch (const minivl::compile_failure& e) {
        std::fputs(e.what(), stderr);
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "minivc: internal error: %s\n", e.what());
        return 2;
    }

    try {
        minivl::write_artifact(out_path, files);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "minivc: %s\n", e.what());
        return 1;
    }
    return 0;
}
