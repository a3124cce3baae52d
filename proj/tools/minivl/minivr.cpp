// minivr: run a minivl simulation artifact produced by minivc.
// Usage: minivr <artifact>

#include <cstdio>
#include <iostream>

#include "minivl.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: minivr <artifact>\n");
        return 64;
    }
    std::string arg = argv[1];
    if (arg == "--help" || arg == "-h") {
        std::printf("usage: minivr <artifact>\n");
        return 0;
    }

    std::vector<minivl::SourceFile> files;
    try {
        files = minivl::read_artifact(arg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "minivr: %s\n", e.what());
        return 1;
    }

    try {
        minivl::Design design = minivl::compile_sources(files);
        minivl::Simulation sim(std::move(design), std::cout);
        sim.run();
        std::cout.flush();
    } catch (const minivl::compile_failure& e) {
        // the artifact was validated at compile time; this indicates tampering
        std::fputs(e.what(), stderr);
        return 1;
    } catch (const std::exception& e) {
        std::cout.flush();
        std::fprintf(stderr, "minivr: %s\n", e.what());
        return 2;
    }
    return 0;
}
