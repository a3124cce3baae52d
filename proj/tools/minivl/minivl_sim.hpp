#pragma once

// Elaboration and event-driven simulation for the minivl dialect.
// Scheduling model: continuous assigns, always @* and always @(edge) bodies
// run inline and atomically; initial blocks run on cooperative threads so
// they can suspend at delays and event controls. Exactly one thing executes
// at a time, in deterministic order.

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <unordered_map>

#include "minivl_front.hpp"

namespace minivl {

// 4-state value, LSB first. Bit codes: 0, 1, 2 = x, 3 = z.
struct VBits {
    std::vector<uint8_t> b;

    size_t width() const { return b.size(); }
    bool operator==(const VBits& o) const { return b == o.b; }

    static VBits xs(size_t n) { return VBits{std::vector<uint8_t>(n, 2)}; }
    static VBits zs(size_t n) { return VBits{std::vector<uint8_t>(n, 3)}; }
    static VBits zeros(size_t n) { return VBits{std::vector<uint8_t>(n, 0)}; }
    static VBits from_uint(uint64_t v, size_t n) {
        VBits out = zeros(n);
        for (size_t i = 0; i < n && i < 64; i++) out.b[i] = (v >> i) & 1;
        return out;
    }

    bool has_xz() const {
        for (uint8_t bit : b)
            if (bit >= 2) return true;
        return false;
    }
    bool any_one() const {
        for (uint8_t bit : b)
            if (bit == 1) return true;
        return false;
    }
    uint64_t to_uint() const { // caller checked has_xz(); truncates past 64 bits
        uint64_t v = 0;
        for (size_t i = 0; i < b.size() && i < 64; i++)
            if (b[i] == 1) v |= 1ull << i;
        return v;
    }
    VBits resized(size_t n) const { // zero-extend / truncate high bits
        VBits out = zeros(n);
        for (size_t i = 0; i < n && i < b.size(); i++) out.b[i] = b[i];
        return out;
    }
};

enum class Truth { False, True, Unknown };

inline Truth truthiness(const VBits& v) {
    if (v.any_one()) return Truth::True;
    return v.has_xz() ? Truth::Unknown : Truth::False;
}

// ---------------------------------------------------------- number literals

inline VBits parse_literal(const std::string& text, std::vector<Diagnostic>* diags,
                           const std::string& file, int line) {
    auto tick = text.find('\'');
    if (tick == std::string::npos) {
        uint64_t v = 0;
        for (char c : text) {
            if (c == '_') continue;
            v = v * 10 + static_cast<uint64_t>(c - '0');
        }
        return VBits::from_uint(v, 32);
    }
    size_t size = 32;
    if (tick > 0) {
        size = 0;
        for (size_t i = 0; i < tick; i++) {
            if (text[i] == '_') continue;
            size = size * 10 + static_cast<size_t>(text[i] - '0');
        }
        if (size == 0) size = 1;
    }
    size_t i = tick + 1;
    if (i < text.size() && (text[i] == 's' || text[i] == 'S')) i++;
    char base = i < text.size() ? static_cast<char>(std::tolower(text[i])) : 'd';
    i++;
    std::string digits = text.substr(i);

    auto bad = [&](const std::string& msg) {
        if (diags) diags->push_back({file, line, msg});
        return VBits::xs(size);
    };

    VBits out = VBits::zeros(size);
    if (base == 'd') {
        uint64_t v = 0;
        for (char c : digits) {
            if (c == '_') continue;
            if (c == 'x' || c == 'X' || c == 'z' || c == 'Z' || c == '?') return VBits::xs(size);
            if (!std::isdigit(static_cast<unsigned char>(c))) return bad("bad decimal literal: " + text);
            v = v * 10 + static_cast<uint64_t>(c - '0');
        }
        return VBits::from_uint(v, size);
    }
    int bits_per = base == 'b' ? 1 : base == 'o' ? 3 : base == 'h' ? 4 : 0;
    if (bits_per == 0) return bad("unsupported number base in: " + text);
    std::vector<uint8_t> lsb_first;
    for (size_t k = digits.size(); k-- > 0;) {
        char c = static_cast<char>(std::tolower(digits[k]));
        if (c == '_') continue;
        uint8_t code;
        int value = 0;
        if (c == 'x' || c == '?') code = 2;
        else if (c == 'z') code = 3;
        else if (std::isdigit(static_cast<unsigned char>(c))) { code = 0; value = c - '0'; }
        else if (c >= 'a' && c <= 'f') { code = 0; value = c - 'a' + 10; }
        else { bad("bad digit in literal: " + text); return VBits::xs(size); }
        if (value >= (1 << bits_per) && code == 0) {
            bad("digit out of range for base in: " + text);
            return VBits::xs(size);
        }
        for (int bit = 0; bit < bits_per; bit++)
            lsb_first.push_back(code != 0 ? code : static_cast<uint8_t>((value >> bit) & 1));
    }
    for (size_t k = 0; k < size; k++) out.b[k] = k < lsb_first.size() ? lsb_first[k] : 0;
    return out;
}

// -------------------------------------------------------------- elaborated

struct Net {
    std::string name; // hierarchical
    size_t width = 1;
    int lsb = 0;
    bool is_reg = false;
    bool is_integer = false;
    Dir dir = Dir::None;
    VBits value;
    std::vector<size_t> comb_handlers;                      // handlers to requeue on change
    std::vector<std::pair<size_t, EdgeKind>> edge_handlers; // clocked blocks
};

struct InstanceScope {
    std::string prefix;
    std::unordered_map<std::string, size_t> nets;
    std::unordered_map<std::string, VBits> params;
};

enum class HandlerKind { ContAssign, CombBlock, EdgeBlock, Periodic };

struct Handler {
    HandlerKind kind = HandlerKind::ContAssign;
    ExprPtr lhs, rhs;   // ContAssign
    StmtPtr body;       // blocks
    InstanceScope* lhs_scope = nullptr;
    InstanceScope* rhs_scope = nullptr;
    std::vector<EventItem> events; // EdgeBlock sensitivity
    uint64_t period = 0;
    bool queued = false;
    std::string file;
    int line = 0;
};

struct InitialProc {
    StmtPtr body;
    InstanceScope* scope = nullptr;
};

struct Design {
    std::vector<Net> nets;
    std::deque<InstanceScope> scopes; // deque: stable pointers
    std::vector<Handler> handlers;
    std::vector<InitialProc> initials;
    std::vector<std::pair<size_t, VBits>> decl_inits;
};

class runtime_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --------------------------------------------------------------- evaluator

class Evaluator {
public:
    explicit Evaluator(Design& design) : design_(design) {}

    // Self-determined bit width of an expression.
    size_t self_width(const Expr& e, InstanceScope& scope) {
        switch (e.kind) {
            case ExprKind::Number: {
                auto tick = e.text.find('\'');
                if (tick == std::string::npos || tick == 0) return 32;
                size_t size = 0;
                for (size_t i = 0; i < tick; i++)
                    if (e.text[i] != '_') size = size * 10 + static_cast<size_t>(e.text[i] - '0');
                return size ? size : 32;
            }
            case ExprKind::String: return e.text.size() * 8;
            case ExprKind::Ident: {
                if (auto p = scope.params.find(e.text); p != scope.params.end())
                    return p->second.width();
                return net(e, scope).width;
            }
            case ExprKind::BitSelect: return 1;
            case ExprKind::PartSelect: {
                long msb = const_index(*e.args[0], scope);
                long lsb = const_index(*e.args[1], scope);
                return msb >= lsb ? static_cast<size_t>(msb - lsb + 1) : 1;
            }
            case ExprKind::IndexedSelect: return static_cast<size_t>(const_index(*e.args[1], scope));
            case ExprKind::Concat: {
                size_t total = 0;
                for (const auto& part : e.args) total += self_width(*part, scope);
                return total;
            }
            case ExprKind::Replicate: {
                size_t count = static_cast<size_t>(const_index(*e.args[0], scope));
                size_t inner = 0;
                for (size_t i = 1; i < e.args.size(); i++) inner += self_width(*e.args[i], scope);
                return count * inner;
            }
            case ExprKind::Unary:
                if (e.op == "!" || e.op == "&" || e.op == "|" || e.op == "^") return 1;
                return self_width(*e.args[0], scope);
            case ExprKind::Binary: {
                const std::string& op = e.op;
                if (op == "==" || op == "!=" || op == "===" || op == "!==" || op == "<" ||
                    op == "<=" || op == ">" || op == ">=" || op == "&&" || op == "||")
                    return 1;
                if (op == "<<" || op == ">>" || op == "<<<" || op == ">>>")
                    return self_width(*e.args[0], scope);
                return std::max(self_width(*e.args[0], scope), self_width(*e.args[1], scope));
            }
            case ExprKind::Ternary:
                return std::max(self_width(*e.args[1], scope), self_width(*e.args[2], scope));
        }
        return 1;
    }

    // ctx = 0 means self-determined.
    VBits eval(const Expr& e, InstanceScope& scope, size_t ctx = 0) {
        switch (e.kind) {
            case ExprKind::Number: {
                VBits v = parse_literal(e.text, nullptr, e.file, e.line);
                return ctx > v.width() ? v.resized(ctx) : v;
            }
            case ExprKind::String: {
                VBits v = VBits::zeros(e.text.size() * 8);
                for (size_t i = 0; i < e.text.size(); i++) {
                    unsigned char c = static_cast<unsigned char>(e.text[e.text.size() - 1 - i]);
                    for (int bit = 0; bit < 8; bit++) v.b[i * 8 + bit] = (c >> bit) & 1;
                }
                return ctx > v.width() ? v.resized(ctx) : v;
            }
            case ExprKind::Ident: {
                if (auto p = scope.params.find(e.text); p != scope.params.end()) {
                    VBits v = p->second;
                    return ctx > v.width() ? v.resized(ctx) : v;
                }
                VBits v = net(e, scope).value;
                return ctx > v.width() ? v.resized(ctx) : v;
            }
            case ExprKind::BitSelect: {
                const Net& n = net(e, scope);
                VBits idx = eval(*e.args[0], scope);
                VBits out = VBits::xs(1);
                if (!idx.has_xz()) {
                    long pos = static_cast<long>(idx.to_uint()) - n.lsb;
                    if (pos >= 0 && pos < static_cast<long>(n.width)) out.b[0] = n.value.b[pos];
                }
                return ctx > 1 ? out.resized(ctx) : out;
            }
            case ExprKind::PartSelect: {
                const Net& n = net(e, scope);
                long msb = const_index(*e.args[0], scope);
                long lsb = const_index(*e.args[1], scope);
                if (msb < lsb) throw runtime_failure(where(e) + "reversed part select");
                VBits out = VBits::xs(static_cast<size_t>(msb - lsb + 1));
                for (long p = lsb; p <= msb; p++) {
                    long idx = p - n.lsb;
                    if (idx >= 0 && idx < static_cast<long>(n.width))
                        out.b[static_cast<size_t>(p - lsb)] = n.value.b[idx];
                }
                return ctx > out.width() ? out.resized(ctx) : out;
            }
            case ExprKind::IndexedSelect: {
                const Net& n = net(e, scope);
                size_t w = static_cast<size_t>(const_index(*e.args[1], scope));
                VBits base = eval(*e.args[0], scope);
                VBits out = VBits::xs(w);
                if (!base.has_xz()) {
                    long lo = static_cast<long>(base.to_uint()) - n.lsb;
                    for (size_t i = 0; i < w; i++) {
                        long idx = lo + static_cast<long>(i);
                        if (idx >= 0 && idx < static_cast<long>(n.width)) out.b[i] = n.value.b[idx];
                    }
                }
                return ctx > w ? out.resized(ctx) : out;
            }
            case ExprKind::Concat: {
                VBits out;
                for (size_t i = e.args.size(); i-- > 0;) {
                    VBits part = eval(*e.args[i], scope);
                    out.b.insert(out.b.end(), part.b.begin(), part.b.end());
                }
                return ctx > out.width() ? out.resized(ctx) : out;
            }
            case ExprKind::Replicate: {
                long count = const_index(*e.args[0], scope);
                if (count < 0) throw runtime_failure(where(e) + "negative replication count");
                VBits inner;
                for (size_t i = e.args.size(); i-- > 1;) {
                    VBits part = eval(*e.args[i], scope);
                    inner.b.insert(inner.b.end(), part.b.begin(), part.b.end());
                }
                VBits out;
                for (long i = 0; i < count; i++) out.b.insert(out.b.end(), inner.b.begin(), inner.b.end());
                return ctx > out.width() ? out.resized(ctx) : out;
            }
            case ExprKind::Unary: return eval_unary(e, scope, ctx);
            case ExprKind::Binary: return eval_binary(e, scope, ctx);
            case ExprKind::Ternary: {
                size_t w = std::max(ctx, self_width(e, scope));
                Truth cond = truthiness(eval(*e.args[0], scope));
                if (cond == Truth::True) return eval(*e.args[1], scope, w);
                if (cond == Truth::False) return eval(*e.args[2], scope, w);
                VBits a = eval(*e.args[1], scope, w).resized(w);
                VBits b = eval(*e.args[2], scope, w).resized(w);
                VBits out = VBits::zeros(w);
                for (size_t i = 0; i < w; i++) out.b[i] = a.b[i] == b.b[i] && a.b[i] < 2 ? a.b[i] : 2;
                return out;
            }
        }
        throw runtime_failure("unreachable expression kind");
    }

    long const_index(const Expr& e, InstanceScope& scope) {
        VBits v = eval(e, scope);
        if (v.has_xz()) throw runtime_failure(where(e) + "index is not a known value");
        return static_cast<long>(v.to_uint());
    }

    Net& net(const Expr& ident_like, InstanceScope& scope) {
        auto it = scope.nets.find(ident_like.text);
        if (it == scope.nets.end())
            throw runtime_failure(where(ident_like) + "'" + ident_like.text + "' is not declared");
        return design_.nets[it->second];
    }

    size_t net_index(const Expr& ident_like, InstanceScope& scope) {
        auto it = scope.nets.find(ident_like.text);
        if (it == scope.nets.end())
            throw runtime_failure(where(ident_like) + "'" + ident_like.text + "' is not declared");
        return it->second;
    }

private:
    static std::string where(const Expr& e) {
        return e.file + ":" + std::to_string(e.line) + ": ";
    }

    VBits eval_unary(const Expr& e, InstanceScope& scope, size_t ctx) {
        const std::string& op = e.op;
        if (op == "!") {
            Truth t = truthiness(eval(*e.args[0], scope));
            VBits out = VBits::xs(1);
            if (t != Truth::Unknown) out.b[0] = t == Truth::False ? 1 : 0;
            return ctx > 1 ? out.resized(ctx) : out;
        }
        if (op == "&" || op == "|" || op == "^") {
            VBits v = eval(*e.args[0], scope);
            VBits out = VBits::xs(1);
            if (op == "&") {
                bool any_zero = false, any_x = false;
                for (uint8_t bit : v.b) {
                    if (bit == 0) any_zero = true;
                    else if (bit >= 2) any_x = true;
                }
                if (any_zero) out.b[0] = 0;
                else if (!any_x) out.b[0] = 1;
            } else if (op == "|") {
                if (v.any_one()) out.b[0] = 1;
                else if (!v.has_xz()) out.b[0] = 0;
            } else {
                if (!v.has_xz()) {
                    int parity = 0;
                    for (uint8_t bit : v.b) parity ^= bit;
                    out.b[0] = static_cast<uint8_t>(parity);
                }
            }
            return ctx > 1 ? out.resized(ctx) : out;
        }
        size_t w = std::max(ctx, self_width(*e.args[0], scope));
        VBits v = eval(*e.args[0], scope, w).resized(w);
        if (op == "~") {
            VBits out = VBits::xs(w);
            for (size_t i = 0; i < w; i++) out.b[i] = v.b[i] == 0 ? 1 : v.b[i] == 1 ? 0 : 2;
            return out;
        }
        if (op == "-") {
            if (v.has_xz()) return VBits::xs(w);
            VBits out = VBits::zeros(w);
            uint8_t carry = 1;
            for (size_t i = 0; i < w; i++) {
                uint8_t inv = v.b[i] ? 0 : 1;
                uint8_t sum = static_cast<uint8_t>(inv + carry);
                out.b[i] = sum & 1;
                carry = sum >> 1;
            }
            return out;
        }
        return v; // unary +
    }

    VBits eval_binary(const Expr& e, InstanceScope& scope, size_t ctx) {
        const std::string& op = e.op;
        if (op == "&&" || op == "||") {
            Truth a = truthiness(eval(*e.args[0], scope));
            Truth b = truthiness(eval(*e.args[1], scope));
            VBits out = VBits::xs(1);
            if (op == "&&") {
                if (a == Truth::False || b == Truth::False) out.b[0] = 0;
                else if (a == Truth::True && b == Truth::True) out.b[0] = 1;
            } else {
                if (a == Truth::True || b == Truth::True) out.b[0] = 1;
                else if (a == Truth::False && b == Truth::False) out.b[0] = 0;
            }
            return ctx > 1 ? out.resized(ctx) : out;
        }
        if (op == "<<" || op == ">>" || op == "<<<" || op == ">>>") {
            size_t w = std::max(ctx, self_width(*e.args[0], scope));
            VBits v = eval(*e.args[0], scope, w).resized(w);
            VBits amount = eval(*e.args[1], scope);
            if (amount.has_xz() || v.has_xz()) return VBits::xs(w);
            uint64_t k = amount.to_uint();
            VBits out = VBits::zeros(w);
            for (size_t i = 0; i < w; i++) {
                if (op == "<<" || op == "<<<") {
                    if (i >= k) out.b[i] = v.b[i - k];
                } else {
                    if (i + k < w) out.b[i] = v.b[i + k];
                }
            }
            return out;
        }
        if (op == "==" || op == "!=" || op == "===" || op == "!==" || op == "<" || op == "<=" ||
            op == ">" || op == ">=") {
            size_t w = std::max(self_width(*e.args[0], scope), self_width(*e.args[1], scope));
            VBits a = eval(*e.args[0], scope, w).resized(w);
            VBits b = eval(*e.args[1], scope, w).resized(w);
            VBits out = VBits::xs(1);
            if (op == "===" || op == "!==") {
                bool equal = a.b == b.b;
                out.b[0] = (op == "===") == equal ? 1 : 0;
            } else if (!a.has_xz() && !b.has_xz()) {
                if (op == "==" || op == "!=") {
                    bool equal = a.b == b.b;
                    out.b[0] = (op == "==") == equal ? 1 : 0;
                } else {
                    // unsigned compare, MSB down
                    int cmp = 0;
                    for (size_t i = w; i-- > 0 && cmp == 0;)
                        cmp = static_cast<int>(a.b[i]) - static_cast<int>(b.b[i]);
                    bool r = op == "<" ? cmp < 0 : op == "<=" ? cmp <= 0 : op == ">" ? cmp > 0 : cmp >= 0;
                    out.b[0] = r ? 1 : 0;
                }
            }
            return ctx > 1 ? out.resized(ctx) : out;
        }

        // arithmetic and bitwise: context-determined width
        size_t w = std::max({ctx, self_width(*e.args[0], scope), self_width(*e.args[1], scope)});
        VBits a = eval(*e.args[0], scope, w).resized(w);
        VBits b = eval(*e.args[1], scope, w).resized(w);
        if (op == "&" || op == "|" || op == "^") {
            VBits out = VBits::zeros(w);
            for (size_t i = 0; i < w; i++) {
                uint8_t x = a.b[i] >= 2 ? 2 : a.b[i];
                uint8_t y = b.b[i] >= 2 ? 2 : b.b[i];
                if (op == "&") out.b[i] = (x == 0 || y == 0) ? 0 : (x == 1 && y == 1) ? 1 : 2;
                else if (op == "|") out.b[i] = (x == 1 || y == 1) ? 1 : (x == 0 && y == 0) ? 0 : 2;
                else out.b[i] = (x == 2 || y == 2) ? 2 : x ^ y;
            }
            return out;
        }
        if (a.has_xz() || b.has_xz()) return VBits::xs(w);
        if (op == "+") {
            VBits out = VBits::zeros(w);
            uint8_t carry = 0;
            for (size_t i = 0; i < w; i++) {
                uint8_t sum = static_cast<uint8_t>(a.b[i] + b.b[i] + carry);
                out.b[i] = sum & 1;
                carry = sum >> 1;
            }
            return out;
        }
        if (op == "-") {
            VBits out = VBits::zeros(w);
            uint8_t borrow = 0;
            for (size_t i = 0; i < w; i++) {
                int diff = static_cast<int>(a.b[i]) - b.b[i] - borrow;
                out.b[i] = static_cast<uint8_t>(diff & 1);
                borrow = diff < 0 ? 1 : 0;
            }
            return out;
        }
        if (op == "*" || op == "/" || op == "%") {
            if (w > 64)
                throw runtime_failure(where(e) + "'" + op + "' wider than 64 bits is not supported");
            uint64_t ua = a.to_uint(), ub = b.to_uint();
            if ((op == "/" || op == "%") && ub == 0) return VBits::xs(w);
            uint64_t r = op == "*" ? ua * ub : op == "/" ? ua / ub : ua % ub;
            return VBits::from_uint(r, w);
        }
        throw runtime_failure(where(e) + "unsupported operator '" + op + "'");
    }

    Design& design_;
};

} // namespace minivl
