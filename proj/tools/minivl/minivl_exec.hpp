#pragma once

#include "minivl_elab.hpp"

namespace minivl {

struct FinishSignal {};
struct ShutdownSignal {};

class Simulation {
public:
    Simulation(Design&& design, std::ostream& out)
        : design_(std::move(design)), out_(out), eval_(design_) {}

    ~Simulation() { shutdown_threads(); }

    // Runs until $finish or the event calendar drains.
    void run() {
        try {
            setup();
            main_loop();
        } catch (...) {
            shutdown_threads();
            throw;
        }
        shutdown_threads();
        if (!thread_error_.empty()) throw runtime_failure(thread_error_);
    }

private:
    struct ThreadProc {
        std::thread th;
        bool go = false;
        bool done = false;
        std::vector<std::pair<size_t, EdgeKind>> waiting_edges;
        const InitialProc* proc = nullptr;
    };

    struct Activation {
        bool is_thread;
        size_t handler = 0;
        ThreadProc* thread = nullptr;
    };

    struct NbaUpdate {
        size_t net;
        size_t offset;
        VBits value;
    };

    void setup() {
        for (const auto& [net, value] : design_.decl_inits) design_.nets[net].value = value;
        for (size_t i = 0; i < design_.handlers.size(); i++) {
            Handler& h = design_.handlers[i];
            if (h.kind == HandlerKind::ContAssign || h.kind == HandlerKind::CombBlock) {
                h.queued = true;
                active_.push_back({false, i, nullptr});
            } else if (h.kind == HandlerKind::Periodic) {
                calendar_[h.period].push_back({false, i, nullptr});
            }
        }
        for (const auto& init : design_.initials) {
            threads_.emplace_back();
            ThreadProc* tp = &threads_.back();
            tp->proc = &init;
            tp->th = std::thread([this, tp] { thread_main(tp); });
            active_.push_back({true, 0, tp});
        }
    }

    void main_loop() {
        while (!finished_) {
            if (!active_.empty()) {
                if (++step_activations_ > 1000000)
                    throw runtime_failure(
                        "simulation did not converge at time " + std::to_string(now_) +
                        " (possible combinational loop)");
                Activation a = active_.front();
                active_.pop_front();
                if (a.is_thread) resume_thread(a.thread);
                else run_handler(a.handler);
                if (!thread_error_.empty()) return;
                continue;
            }
            if (!nba_.empty()) {
                std::vector<NbaUpdate> updates;
                updates.swap(nba_);
                for (const auto& u : updates) write_net_slice(u.net, u.offset, u.value);
                continue;
            }
            if (!calendar_.empty()) {
                auto it = calendar_.begin();
                now_ = it->first;
                step_activations_ = 0;
                for (const auto& w : it->second) active_.push_back(w);
                calendar_.erase(it);
                continue;
            }
            break; // quiescent: nothing left to do
        }
    }

    // ----- handlers (run inline on the scheduler thread)

    size_t lvalue_width(const Expr& lhs, InstanceScope& scope) {
        if (lhs.kind == ExprKind::Concat) {
            size_t total = 0;
            for (const auto& part : lhs.args) total += lvalue_width(*part, scope);
            return total;
        }
        return eval_.self_width(lhs, scope);
    }

    void run_handler(size_t idx) {
        Handler& h = design_.handlers[idx];
        h.queued = false;
        try {
            if (h.kind == HandlerKind::ContAssign) {
                size_t w = lvalue_width(*h.lhs, *h.lhs_scope);
                VBits v = eval_.eval(*h.rhs, *h.rhs_scope, w);
                assign_lvalue(*h.lhs, *h.lhs_scope, v.resized(w), /*nonblocking=*/false);
            } else if (h.kind == HandlerKind::Periodic) {
                exec_stmt(h.body, *h.rhs_scope, nullptr);
                calendar_[now_ + h.period].push_back({false, idx, nullptr});
            } else {
                exec_stmt(h.body, *h.rhs_scope, nullptr);
            }
        } catch (const FinishSignal&) {
            finished_ = true;
        }
    }

    // ----- net updates and propagation

    void write_net_slice(size_t net_idx, size_t offset, const VBits& value) {
        Net& net = design_.nets[net_idx];
        bool changed = false;
        uint8_t old_lsb = net.value.b.empty() ? 2 : net.value.b[0];
        for (size_t i = 0; i < value.width(); i++) {
            size_t pos = offset + i;
            if (pos >= net.width) break;
            if (net.value.b[pos] != value.b[i]) {
                net.value.b[pos] = value.b[i];
                changed = true;
            }
        }
        if (!changed) return;
        uint8_t new_lsb = net.value.b[0];

        for (size_t hidx : net.comb_handlers) {
            Handler& h = design_.handlers[hidx];
            if (!h.queued) {
                h.queued = true;
                active_.push_back({false, hidx, nullptr});
            }
        }
        for (const auto& [hidx, kind] : net.edge_handlers) {
            if (!edge_matches(kind, old_lsb, new_lsb)) continue;
            Handler& h = design_.handlers[hidx];
            if (!h.queued) {
                h.queued = true;
                active_.push_back({false, hidx, nullptr});
            }
        }
        for (auto& tp : threads_) {
            if (tp.done || tp.waiting_edges.empty()) continue;
            for (const auto& [wnet, kind] : tp.waiting_edges) {
                if (wnet == net_idx && edge_matches(kind, old_lsb, new_lsb)) {
                    tp.waiting_edges.clear();
                    active_.push_back({true, 0, &tp});
                    break;
                }
            }
        }
    }

    static bool edge_matches(EdgeKind kind, uint8_t old_bit, uint8_t new_bit) {
        if (old_bit == new_bit) return false;
        switch (kind) {
            case EdgeKind::Any: return true;
            case EdgeKind::Pos: return (old_bit == 0 && new_bit != 0) || (old_bit >= 2 && new_bit == 1);
            case EdgeKind::Neg: return (old_bit == 1 && new_bit != 1) || (old_bit >= 2 && new_bit == 0);
        }
        return false;
    }

    void assign_lvalue(const Expr& lhs, InstanceScope& scope, const VBits& value, bool nonblocking) {
        if (lhs.kind == ExprKind::Concat) {
            // rightmost part takes the lowest bits
            size_t consumed = 0;
            for (size_t i = lhs.args.size(); i-- > 0;) {
                size_t w = lvalue_width(*lhs.args[i], scope);
                VBits part = VBits::xs(w);
                for (size_t k = 0; k < w; k++)
                    part.b[k] = consumed + k < value.width() ? value.b[consumed + k] : 0;
                assign_lvalue(*lhs.args[i], scope, part, nonblocking);
                consumed += w;
            }
            return;
        }
        Net& net = eval_.net(lhs, scope);
        size_t net_idx = eval_.net_index(lhs, scope);
        size_t offset = 0;
        size_t width = net.width;
        if (lhs.kind == ExprKind::BitSelect) {
            VBits idx = eval_.eval(*lhs.args[0], scope);
            if (idx.has_xz()) return; // write to unknown index: no-op
            long pos = static_cast<long>(idx.to_uint()) - net.lsb;
            if (pos < 0 || pos >= static_cast<long>(net.width)) return;
            offset = static_cast<size_t>(pos);
            width = 1;
        } else if (lhs.kind == ExprKind::PartSelect) {
            long msb = eval_.const_index(*lhs.args[0], scope);
            long lsb = eval_.const_index(*lhs.args[1], scope);
            if (msb < lsb) throw runtime_failure("reversed part select in assignment");
            offset = static_cast<size_t>(lsb - net.lsb);
            width = static_cast<size_t>(msb - lsb + 1);
        } else if (lhs.kind == ExprKind::IndexedSelect) {
            VBits base = eval_.eval(*lhs.args[0], scope);
            if (base.has_xz()) return;
            long lo = static_cast<long>(base.to_uint()) - net.lsb;
            if (lo < 0) return;
            offset = static_cast<size_t>(lo);
            width = static_cast<size_t>(eval_.const_index(*lhs.args[1], scope));
        }
        VBits sized = value.resized(width);
        if (nonblocking) nba_.push_back({net_idx, offset, std::move(sized)});
        else write_net_slice(net_idx, offset, sized);
    }

    // ----- statement execution (scheduler thread or a proc thread)

    void exec_stmt(const StmtPtr& stmt, InstanceScope& scope, ThreadProc* thr) {
        const Stmt& s = *stmt;
        switch (s.kind) {
            case StmtKind::Block:
                for (const auto& c : s.body) exec_stmt(c, scope, thr);
                return;
            case StmtKind::Assign: {
                size_t w = lvalue_width(*s.lhs, scope);
                VBits v = eval_.eval(*s.rhs, scope, w);
                assign_lvalue(*s.lhs, scope, v.resized(w), s.nonblocking);
                return;
            }
            case StmtKind::If: {
                if (truthiness(eval_.eval(*s.cond, scope)) == Truth::True)
                    exec_stmt(s.then_branch, scope, thr);
                else if (s.else_branch)
                    exec_stmt(s.else_branch, scope, thr);
                return;
            }
            case StmtKind::Case: {
                VBits sel = eval_.eval(*s.cond, scope);
                const CaseItem* fallback = nullptr;
                for (const auto& item : s.case_items) {
                    if (item.labels.empty()) {
                        fallback = &item;
                        continue;
                    }
                    for (const auto& label : item.labels) {
                        size_t w = std::max(sel.width(), eval_.self_width(*label, scope));
                        VBits lv = eval_.eval(*label, scope, w).resized(w);
                        if (sel.resized(w) == lv) { // case equality: exact, x/z literal
                            exec_stmt(item.body, scope, thr);
                            return;
                        }
                    }
                }
                if (fallback) exec_stmt(fallback->body, scope, thr);
                return;
            }
            case StmtKind::For: {
                exec_stmt(s.init, scope, thr);
                size_t guard = 0;
                while (truthiness(eval_.eval(*s.cond, scope)) == Truth::True) {
                    exec_stmt(s.then_branch, scope, thr);
                    exec_stmt(s.step, scope, thr);
                    if (++guard > 10000000)
                        throw runtime_failure(s.file + ":" + std::to_string(s.line) +
                                              ": for loop exceeded 10M iterations");
                }
                return;
            }
            case StmtKind::Delay: {
                if (!thr) throw runtime_failure("delay outside an initial block");
                thread_wait_delay(thr, s.delay);
                if (s.then_branch) exec_stmt(s.then_branch, scope, thr);
                return;
            }
            case StmtKind::EventWait: {
                if (!thr) throw runtime_failure("event control outside an initial block");
                std::vector<std::pair<size_t, EdgeKind>> waits;
                for (const auto& ev : s.events) {
                    auto it = scope.nets.find(ev.signal);
                    if (it != scope.nets.end()) waits.push_back({it->second, ev.edge});
                }
                thread_wait_edges(thr, std::move(waits));
                if (s.then_branch) exec_stmt(s.then_branch, scope, thr);
                return;
            }
            case StmtKind::Display:
                out_ << format_display(s, scope);
                if (s.newline) out_ << '\n';
                return;
            case StmtKind::Finish: throw FinishSignal{};
            case StmtKind::Null: return;
        }
    }

    // ----- $display formatting

    static void decimal_accumulate(std::string& dec, uint8_t bit) {
        // dec = dec * 2 + bit, on a decimal digit string
        int carry = bit;
        for (size_t i = dec.size(); i-- > 0;) {
            int d = (dec[i] - '0') * 2 + carry;
            dec[i] = static_cast<char>('0' + d % 10);
            carry = d / 10;
        }
        if (carry) dec.insert(dec.begin(), static_cast<char>('0' + carry));
    }

    static std::string to_decimal(const VBits& v) {
        std::string dec = "0";
        for (size_t i = v.width(); i-- > 0;) decimal_accumulate(dec, v.b[i]);
        return dec;
    }

    std::string format_display(const Stmt& s, InstanceScope& scope) {
        std::string out;
        size_t arg = 0;
        auto next_value = [&]() -> VBits {
            if (arg >= s.args.size()) return VBits::xs(1);
            return eval_.eval(*s.args[arg++], scope);
        };
        const std::string& fmt = s.format;
        for (size_t i = 0; i < fmt.size(); i++) {
            if (fmt[i] != '%') {
                out += fmt[i];
                continue;
            }
            if (i + 1 >= fmt.size()) break;
            i++;
            bool zero_flag = false;
            std::string width_digits;
            while (i < fmt.size() && std::isdigit(static_cast<unsigned char>(fmt[i]))) {
                if (fmt[i] == '0' && width_digits.empty()) zero_flag = true;
                else width_digits += fmt[i];
                i++;
            }
            if (i >= fmt.size()) break;
            char spec = static_cast<char>(std::tolower(fmt[i]));
            if (spec == '%') {
                out += '%';
                continue;
            }
            if (spec == 's') {
                if (arg < s.args.size() && s.args[arg]->kind == ExprKind::String) {
                    out += s.args[arg++]->text;
                } else {
                    VBits v = next_value();
                    std::string text;
                    for (size_t k = v.width(); k >= 8; k -= 8) {
                        int c = 0;
                        bool xz = false;
                        for (int bit = 0; bit < 8; bit++) {
                            uint8_t code = v.b[k - 8 + bit];
                            if (code >= 2) xz = true;
                            else c |= code << bit;
                        }
                        if (!xz && c != 0) text += static_cast<char>(c);
                        if (k == 8) break;
                    }
                    out += text;
                }
                continue;
            }
            VBits v = next_value();
            if (spec == 'b') {
                std::string bits;
                for (size_t k = v.width(); k-- > 0;) {
                    uint8_t code = v.b[k];
                    bits += code == 0 ? '0' : code == 1 ? '1' : code == 2 ? 'x' : 'z';
                }
                if (zero_flag) { // %0b: minimal width
                    size_t first = bits.find_first_not_of('0');
                    bits = first == std::string::npos ? "0" : bits.substr(first);
                }
                out += bits;
            } else if (spec == 'd') {
                std::string text = v.has_xz() ? "x" : to_decimal(v);
                if (!zero_flag) {
                    // pad to the width of the largest value this vector can hold
                    std::string max_text = to_decimal(VBits{std::vector<uint8_t>(v.width(), 1)});
                    while (text.size() < max_text.size()) text.insert(text.begin(), ' ');
                }
                out += text;
            } else if (spec == 'h' || spec == 'x') {
                std::string hex;
                size_t nibbles = (v.width() + 3) / 4;
                for (size_t n = nibbles; n-- > 0;) {
                    int value = 0;
                    bool xz = false;
                    for (size_t bit = 0; bit < 4; bit++) {
                        size_t pos = n * 4 + bit;
                        if (pos >= v.width()) continue;
                        if (v.b[pos] >= 2) xz = true;
                        else value |= v.b[pos] << bit;
                    }
                    hex += xz ? 'x' : "0123456789abcdef"[value];
                }
                if (zero_flag) {
                    size_t first = hex.find_first_not_of('0');
                    hex = first == std::string::npos ? "0" : hex.substr(first);
                }
                out += hex;
            } else if (spec == 't') {
                out += std::to_string(now_);
            } else {
                out += '%';
                out += spec;
            }
        }
        return out;
    }

    // ----- cooperative threads for initial blocks

    void thread_main(ThreadProc* tp) {
        {
            std::unique_lock lk(mutex_);
            cv_.wait(lk, [&] { return tp->go || shutdown_; });
            if (shutdown_) {
                tp->done = true;
                tp->go = false;
                cv_.notify_all();
                return;
            }
        }
        try {
            exec_stmt(tp->proc->body, *tp->proc->scope, tp);
        } catch (const FinishSignal&) {
            finished_ = true;
        } catch (const ShutdownSignal&) {
        } catch (const std::exception& e) {
            if (thread_error_.empty()) thread_error_ = e.what();
            finished_ = true;
        }
        std::unique_lock lk(mutex_);
        tp->done = true;
        tp->go = false;
        cv_.notify_all();
    }

    void resume_thread(ThreadProc* tp) {
        if (tp->done) return;
        std::unique_lock lk(mutex_);
        tp->go = true;
        cv_.notify_all();
        cv_.wait(lk, [&] { return !tp->go; });
    }

    // called from inside a proc thread
    void thread_yield(ThreadProc* me) {
        std::unique_lock lk(mutex_);
        me->go = false;
        cv_.notify_all();
        cv_.wait(lk, [&] { return me->go || shutdown_; });
        if (shutdown_) throw ShutdownSignal{};
    }

    void thread_wait_delay(ThreadProc* me, uint64_t delay) {
        calendar_[now_ + delay].push_back({true, 0, me});
        thread_yield(me);
    }

    void thread_wait_edges(ThreadProc* me, std::vector<std::pair<size_t, EdgeKind>> waits) {
        me->waiting_edges = std::move(waits);
        thread_yield(me);
    }

    void shutdown_threads() {
        {
            std::unique_lock lk(mutex_);
            shutdown_ = true;
            cv_.notify_all();
        }
        for (auto& tp : threads_) {
            if (tp.th.joinable()) {
                // a running thread yields back before we can join it
                tp.th.join();
            }
        }
        threads_.clear();
    }

    Design design_;
    std::ostream& out_;
    Evaluator eval_;
    uint64_t now_ = 0;
    bool finished_ = false;
    size_t step_activations_ = 0;
    std::deque<Activation> active_;
    std::map<uint64_t, std::vector<Activation>> calendar_;
    std::vector<NbaUpdate> nba_;
    std::deque<ThreadProc> threads_;
    std::mutex mutex_;
    std::condition_variable cv_;
    bool shutdown_ = false;
    std::string thread_error_;
};

} // namespace minivl
