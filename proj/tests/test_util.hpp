#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testutil {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(VERILOOP_SOURCE_DIR); }
inline fs::path fixtures_corpus() { return source_dir() / "fixtures" / "corpus"; }
inline fs::path fixtures_scripts() { return source_dir() / "fixtures" / "scripts"; }
inline fs::path golden_dir() { return source_dir() / "tests" / "golden"; }

// Self-cleaning scratch directory under the build tree.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = fs::temp_directory_path() /
                ("veriloop-" + tag + "-" + std::to_string(rng()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

    void write(const std::string& rel, const std::string& content) const {
        fs::path p = path_ / rel;
        fs::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary);
        out << content;
    }

private:
    fs::path path_;
};

} // namespace testutil
