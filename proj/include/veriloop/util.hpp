#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace veriloop {

// Base class for all typed errors in the library. Subcommands map these to
// exit codes, so every failure mode gets its own type.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            if (pos < text.size()) lines.emplace_back(text.substr(pos));
            break;
        }
        std::string line(text.substr(pos, nl - pos));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        pos = nl + 1;
    }
    return lines;
}

inline bool is_valid_utf8(std::string_view s) {
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        size_t extra;
        if (c < 0x80) { i++; continue; }
        else if ((c & 0xE0) == 0xC0) { extra = 1; if (c < 0xC2) return false; }
        else if ((c & 0xF0) == 0xE0) { extra = 2; }
        else if ((c & 0xF8) == 0xF0) { extra = 3; if (c > 0xF4) return false; }
        else return false;
        if (i + extra >= s.size()) return false;
        for (size_t j = 1; j <= extra; j++) {
            if ((static_cast<unsigned char>(s[i + j]) & 0xC0) != 0x80) return false;
        }
        i += extra + 1;
    }
    return true;
}

class file_error : public error {
public:
    using error::error;
};

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw file_error("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (!is_valid_utf8(text))
        throw file_error("file is not valid UTF-8: " + path.string());
    return text;
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw file_error("cannot write file: " + path.string());
    out << text;
}

// FNV-1a, used for config fingerprints. Stable across platforms.
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ull) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string to_hex(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; i--) {
        out[i] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

// True iff text[pos..] starts with `word` delimited by non-identifier chars
// on both sides.
inline bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '$';
}

inline bool token_at(std::string_view text, size_t pos, std::string_view word) {
    if (pos + word.size() > text.size()) return false;
    if (text.substr(pos, word.size()) != word) return false;
    if (pos > 0 && is_word_char(text[pos - 1])) return false;
    if (pos + word.size() < text.size() && is_word_char(text[pos + word.size()])) return false;
    return true;
}

inline size_t find_token(std::string_view text, std::string_view word, size_t from = 0) {
    size_t pos = from;
    while ((pos = text.find(word, pos)) != std::string_view::npos) {
        if (token_at(text, pos, word)) return pos;
        pos++;
    }
    return std::string_view::npos;
}

inline bool contains_token(std::string_view text, std::string_view word) {
    return find_token(text, word) != std::string_view::npos;
}

} // namespace veriloop
