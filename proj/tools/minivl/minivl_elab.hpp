#pragma once

// Flattens a parsed module set into a runnable Design: resolves parameters,
// sizes nets, expands instances, wires port connections as continuous
// assigns, and runs the semantic checks (undeclared names, l-value rules,
// delays outside initial blocks, port mismatches).

#include <set>
#include <unordered_map>

#include "minivl_sim.hpp"

namespace minivl {

class Elaborator {
public:
    Elaborator(const std::vector<Module>& modules, std::vector<Diagnostic>& diags)
        : diags_(diags) {
        for (const auto& m : modules) {
            if (by_name_.count(m.name))
                diags_.push_back({m.file, m.line, "module '" + m.name + "' is defined twice"});
            else
                by_name_[m.name] = &m;
        }
    }

    Design elaborate() {
        std::set<std::string> instantiated;
        for (const auto& [name, mod] : by_name_)
            for (const auto& inst : mod->instances)
                instantiated.insert(inst.module_name);

        // Every uninstantiated module is a simulation root.
        for (const auto& [name, mod] : by_name_) {
            if (instantiated.count(name)) continue;
            instantiate(*mod, "", 0);
        }
        if (design_.nets.empty() && diags_.empty())
            diags_.push_back({"", 0, "no modules to elaborate"});

        wire_sensitivity();
        return std::move(design_);
    }

private:
    // ----- instantiation

    InstanceScope* instantiate(const Module& mod, const std::string& prefix, int depth) {
        if (depth > 64) {
            diags_.push_back({mod.file, mod.line,
                              "instantiation of '" + mod.name + "' is too deep (recursive modules?)"});
            return nullptr;
        }
        design_.scopes.emplace_back();
        InstanceScope* scope = &design_.scopes.back();
        scope->prefix = prefix;

        Evaluator eval(design_);

        for (const auto& p : mod.params) {
            if (!expr_is_constant(*p.value, *scope)) {
                diags_.push_back({p.file, p.line, "parameter '" + p.name + "' must be a constant"});
                scope->params[p.name] = VBits::xs(32);
                continue;
            }
            try {
                scope->params[p.name] = eval.eval(*p.value, *scope);
            } catch (const std::exception& e) {
                diags_.push_back({p.file, p.line, e.what()});
                scope->params[p.name] = VBits::xs(32);
            }
        }

        // merge duplicate declarations (non-ANSI style: output y; reg y;)
        std::vector<NetDecl> merged;
        std::unordered_map<std::string, size_t> decl_index;
        for (const auto& decl : mod.nets) {
            auto it = decl_index.find(decl.name);
            if (it == decl_index.end()) {
                decl_index[decl.name] = merged.size();
                merged.push_back(decl);
                continue;
            }
            NetDecl& prev = merged[it->second];
            if (decl.dir != Dir::None) {
                if (prev.dir != Dir::None && prev.dir != decl.dir)
                    diags_.push_back({decl.file, decl.line,
                                      "'" + decl.name + "' declared with conflicting directions"});
                prev.dir = decl.dir;
            }
            if (decl.is_reg) prev.is_reg = true;
            if (decl.is_integer) prev.is_integer = true;
            if (decl.has_range) {
                if (prev.has_range && !ranges_equal(prev, decl, *scope, eval))
                    diags_.push_back({decl.file, decl.line,
                                      "'" + decl.name + "' declared with conflicting ranges"});
                prev.has_range = true;
                prev.msb = decl.msb;
                prev.lsb = decl.lsb;
            }
            if (decl.init) {
                if (prev.init)
                    diags_.push_back({decl.file, decl.line, "'" + decl.name + "' initialized twice"});
                prev.init = decl.init;
            }
            if (decl.dir == Dir::None && !decl.is_reg && !decl.has_range && !decl.init &&
                prev.dir == Dir::None && !decl.is_integer)
                diags_.push_back({decl.file, decl.line, "duplicate declaration of '" + decl.name + "'"});
        }

        for (const auto& decl : merged) {
            Net net;
            net.name = prefix.empty() ? decl.name : prefix + "." + decl.name;
            net.is_reg = decl.is_reg;
            net.is_integer = decl.is_integer;
            net.dir = decl.dir;
            if (decl.is_integer) {
                net.width = 32;
            } else if (decl.has_range) {
                long msb = const_or_diag(decl.msb, *scope, eval, decl.file, decl.line);
                long lsb = const_or_diag(decl.lsb, *scope, eval, decl.file, decl.line);
                if (msb < lsb) {
                    diags_.push_back({decl.file, decl.line,
                                      "ascending bit ranges ([low:high]) are not supported"});
                    std::swap(msb, lsb);
                }
                net.width = static_cast<size_t>(msb - lsb + 1);
                net.lsb = static_cast<int>(lsb);
            }
            // variables power up as x; undriven nets read as high impedance
            net.value = net.is_reg ? VBits::xs(net.width) : VBits::zs(net.width);
            scope->nets[decl.name] = design_.nets.size();
            design_.nets.push_back(std::move(net));

            if (decl.init) {
                if (!expr_is_constant(*decl.init, *scope)) {
                    diags_.push_back({decl.file, decl.line,
                                      "initializer for '" + decl.name + "' must be a constant"});
                } else {
                    try {
                        VBits v = eval.eval(*decl.init, *scope, design_.nets.back().width);
                        design_.decl_inits.push_back(
                            {scope->nets[decl.name], v.resized(design_.nets.back().width)});
                    } catch (const std::exception& e) {
                        diags_.push_back({decl.file, decl.line, e.what()});
                    }
                }
            }
        }

        for (const auto& port : mod.port_order) {
            auto it = scope->nets.find(port);
            if (it == scope->nets.end() || design_.nets[it->second].dir == Dir::None)
                diags_.push_back({mod.file, mod.line,
                                  "port '" + port + "' of module '" + mod.name +
                                      "' has no direction declaration"});
        }

        for (const auto& a : mod.assigns) {
            check_expr(*a.rhs, *scope);
            check_cont_lvalue(*a.lhs, *scope);
            Handler h;
            h.kind = HandlerKind::ContAssign;
            h.lhs = a.lhs;
            h.rhs = a.rhs;
            h.lhs_scope = h.rhs_scope = scope;
            h.file = a.file;
            h.line = a.line;
            design_.handlers.push_back(std::move(h));
        }

        for (const auto& blk : mod.always_blocks) {
            check_stmt(*blk.body, *scope, /*in_initial=*/false);
            Handler h;
            h.body = blk.body;
            h.lhs_scope = h.rhs_scope = scope;
            h.file = blk.file;
            h.line = blk.line;
            if (blk.kind == AlwaysKind::Star) {
                h.kind = HandlerKind::CombBlock;
            } else if (blk.kind == AlwaysKind::Periodic) {
                h.kind = HandlerKind::Periodic;
                h.period = blk.period;
                if (blk.period == 0)
                    diags_.push_back({blk.file, blk.line, "always #0 is not supported"});
            } else {
                h.kind = HandlerKind::EdgeBlock;
                for (const auto& ev : blk.events) {
                    if (!scope->nets.count(ev.signal))
                        diags_.push_back({blk.file, blk.line, "'" + ev.signal + "' is not declared"});
                }
                h.events = blk.events;
            }
            design_.handlers.push_back(std::move(h));
        }

        for (const auto& init : mod.initial_blocks) {
            check_stmt(*init, *scope, /*in_initial=*/true);
            design_.initials.push_back({init, scope});
        }

        for (const auto& inst : mod.instances) {
            auto child_it = by_name_.find(inst.module_name);
            if (child_it == by_name_.end()) {
                diags_.push_back({inst.file, inst.line,
                                  "unknown module '" + inst.module_name + "' instantiated here"});
                continue;
            }
            const Module& child = *child_it->second;
            std::string child_prefix =
                prefix.empty() ? inst.instance_name : prefix + "." + inst.instance_name;
            InstanceScope* child_scope = instantiate(child, child_prefix, depth + 1);
            if (!child_scope) continue;
            connect_ports(inst, child, *child_scope, *scope);
        }
        return scope;
    }

    void connect_ports(const Instance& inst, const Module& child, InstanceScope& child_scope,
                       InstanceScope& outer) {
        if (!inst.named && inst.connections.size() > child.port_order.size()) {
            diags_.push_back({inst.file, inst.line,
                              "instance '" + inst.instance_name + "' has " +
                                  std::to_string(inst.connections.size()) + " connections but '" +
                                  child.name + "' has " +
                                  std::to_string(child.port_order.size()) + " ports"});
            return;
        }
        std::set<std::string> seen;
        for (size_t i = 0; i < inst.connections.size(); i++) {
            const PortConnection& conn = inst.connections[i];
            std::string port = conn.port;
            if (port.empty()) {
                if (inst.named) {
                    diags_.push_back({inst.file, inst.line,
                                      "cannot mix named and positional connections"});
                    return;
                }
                port = child.port_order[i];
            }
            if (!seen.insert(port).second)
                diags_.push_back({inst.file, inst.line, "port '" + port + "' connected twice"});
            auto pit = child_scope.nets.find(port);
            if (pit == child_scope.nets.end() ||
                design_.nets[pit->second].dir == Dir::None) {
                diags_.push_back({inst.file, inst.line,
                                  "'" + child.name + "' has no port named '" + port + "'"});
                continue;
            }
            if (!conn.expr) continue; // explicitly unconnected
            check_expr(*conn.expr, outer);

            auto port_ident = std::make_shared<Expr>();
            port_ident->kind = ExprKind::Ident;
            port_ident->text = port;
            port_ident->file = inst.file;
            port_ident->line = inst.line;

            Handler h;
            h.kind = HandlerKind::ContAssign;
            h.file = inst.file;
            h.line = inst.line;
            if (design_.nets[pit->second].dir == Dir::Input) {
                h.lhs = port_ident;
                h.lhs_scope = &child_scope;
                h.rhs = conn.expr;
                h.rhs_scope = &outer;
            } else {
                if (!is_lvalue_shape(*conn.expr)) {
                    diags_.push_back({inst.file, inst.line,
                                      "output port '" + port + "' needs a connectable signal"});
                    continue;
                }
                check_cont_lvalue(*conn.expr, outer);
                h.lhs = conn.expr;
                h.lhs_scope = &outer;
                h.rhs = port_ident;
                h.rhs_scope = &child_scope;
            }
            design_.handlers.push_back(std::move(h));
        }
    }

    // ----- checks

    bool expr_is_constant(const Expr& e, InstanceScope& scope) {
        switch (e.kind) {
            case ExprKind::Number:
            case ExprKind::String: return true;
            case ExprKind::Ident: return scope.params.count(e.text) > 0;
            default:
                for (const auto& a : e.args)
                    if (!expr_is_constant(*a, scope)) return false;
                return e.kind != ExprKind::BitSelect && e.kind != ExprKind::PartSelect &&
                       e.kind != ExprKind::IndexedSelect;
        }
    }

    long const_or_diag(const ExprPtr& e, InstanceScope& scope, Evaluator& eval,
                       const std::string& file, int line) {
        if (!e || !expr_is_constant(*e, scope)) {
            diags_.push_back({file, line, "range bounds must be constant"});
            return 0;
        }
        try {
            return eval.const_index(*e, scope);
        } catch (const std::exception& ex) {
            diags_.push_back({file, line, ex.what()});
            return 0;
        }
    }

    bool ranges_equal(const NetDecl& a, const NetDecl& b, InstanceScope& scope, Evaluator& eval) {
        try {
            return eval.const_index(*a.msb, scope) == eval.const_index(*b.msb, scope) &&
                   eval.const_index(*a.lsb, scope) == eval.const_index(*b.lsb, scope);
        } catch (...) {
            return false;
        }
    }

    void check_expr(const Expr& e, InstanceScope& scope) {
        switch (e.kind) {
            case ExprKind::Number:
            case ExprKind::String: return;
            case ExprKind::Ident:
            case ExprKind::BitSelect:
            case ExprKind::PartSelect:
            case ExprKind::IndexedSelect:
                if (!scope.params.count(e.text) && !scope.nets.count(e.text) && !e.text.empty() &&
                    e.kind == ExprKind::Ident)
                    diags_.push_back({e.file, e.line, "'" + e.text + "' is not declared"});
                if (e.kind != ExprKind::Ident && !scope.nets.count(e.text))
                    diags_.push_back({e.file, e.line, "'" + e.text + "' is not declared"});
                for (const auto& a : e.args) check_expr(*a, scope);
                return;
            default:
                for (const auto& a : e.args) check_expr(*a, scope);
                return;
        }
    }

    bool is_lvalue_shape(const Expr& e) {
        switch (e.kind) {
            case ExprKind::Ident:
            case ExprKind::BitSelect:
            case ExprKind::PartSelect:
            case ExprKind::IndexedSelect: return true;
            case ExprKind::Concat:
                for (const auto& a : e.args)
                    if (!is_lvalue_shape(*a)) return false;
                return true;
            default: return false;
        }
    }

    // procedural assignment target: must be a reg (or integer)
    void check_proc_lvalue(const Expr& e, InstanceScope& scope) {
        if (e.kind == ExprKind::Concat) {
            for (const auto& a : e.args) check_proc_lvalue(*a, scope);
            return;
        }
        if (!is_lvalue_shape(e)) {
            diags_.push_back({e.file, e.line, "invalid assignment target"});
            return;
        }
        auto it = scope.nets.find(e.text);
        if (it == scope.nets.end()) {
            diags_.push_back({e.file, e.line, "'" + e.text + "' is not declared"});
            return;
        }
        if (!design_.nets[it->second].is_reg)
            diags_.push_back({e.file, e.line,
                              "'" + e.text + "' is used as an l-value but was declared as a wire"});
        for (const auto& a : e.args) check_expr(*a, scope);
    }

    // continuous assignment target: must be a wire
    void check_cont_lvalue(const Expr& e, InstanceScope& scope) {
        if (e.kind == ExprKind::Concat) {
            for (const auto& a : e.args) check_cont_lvalue(*a, scope);
            return;
        }
        if (!is_lvalue_shape(e)) {
            diags_.push_back({e.file, e.line, "invalid continuous assignment target"});
            return;
        }
        auto it = scope.nets.find(e.text);
        if (it == scope.nets.end()) {
            diags_.push_back({e.file, e.line, "'" + e.text + "' is not declared"});
            return;
        }
        if (design_.nets[it->second].is_reg)
            diags_.push_back({e.file, e.line,
                              "'" + e.text +
                                  "' is declared as a reg and cannot be driven by a continuous assignment"});
        for (const auto& a : e.args) check_expr(*a, scope);
    }

    void check_stmt(const Stmt& s, InstanceScope& scope, bool in_initial) {
        switch (s.kind) {
            case StmtKind::Block:
                for (const auto& c : s.body) check_stmt(*c, scope, in_initial);
                return;
            case StmtKind::Assign:
                check_proc_lvalue(*s.lhs, scope);
                check_expr(*s.rhs, scope);
                return;
            case StmtKind::If:
                check_expr(*s.cond, scope);
                check_stmt(*s.then_branch, scope, in_initial);
                if (s.else_branch) check_stmt(*s.else_branch, scope, in_initial);
                return;
            case StmtKind::Case:
                check_expr(*s.cond, scope);
                for (const auto& item : s.case_items) {
                    for (const auto& l : item.labels) check_expr(*l, scope);
                    check_stmt(*item.body, scope, in_initial);
                }
                return;
            case StmtKind::For:
                check_stmt(*s.init, scope, in_initial);
                check_expr(*s.cond, scope);
                check_stmt(*s.step, scope, in_initial);
                check_stmt(*s.then_branch, scope, in_initial);
                return;
            case StmtKind::Delay:
                if (!in_initial)
                    diags_.push_back({s.file, s.line,
                                      "delays are only supported inside initial blocks"});
                if (s.then_branch) check_stmt(*s.then_branch, scope, in_initial);
                return;
            case StmtKind::EventWait:
                if (!in_initial)
                    diags_.push_back({s.file, s.line,
                                      "event controls are only supported inside initial blocks"});
                for (const auto& ev : s.events)
                    if (!scope.nets.count(ev.signal))
                        diags_.push_back({s.file, s.line, "'" + ev.signal + "' is not declared"});
                if (s.then_branch) check_stmt(*s.then_branch, scope, in_initial);
                return;
            case StmtKind::Display:
                for (const auto& a : s.args) check_expr(*a, scope);
                return;
            case StmtKind::Finish:
            case StmtKind::Null: return;
        }
    }

    // ----- sensitivity wiring

    void collect_reads(const Expr& e, InstanceScope& scope, std::set<size_t>& out) {
        switch (e.kind) {
            case ExprKind::Number:
            case ExprKind::String: return;
            case ExprKind::Ident: {
                auto it = scope.nets.find(e.text);
                if (it != scope.nets.end()) out.insert(it->second);
                return;
            }
            case ExprKind::BitSelect:
            case ExprKind::PartSelect:
            case ExprKind::IndexedSelect: {
                auto it = scope.nets.find(e.text);
                if (it != scope.nets.end()) out.insert(it->second);
                for (const auto& a : e.args) collect_reads(*a, scope, out);
                return;
            }
            default:
                for (const auto& a : e.args) collect_reads(*a, scope, out);
                return;
        }
    }

    void collect_stmt_reads(const Stmt& s, InstanceScope& scope, std::set<size_t>& reads,
                            std::set<size_t>& writes) {
        switch (s.kind) {
            case StmtKind::Block:
                for (const auto& c : s.body) collect_stmt_reads(*c, scope, reads, writes);
                return;
            case StmtKind::Assign: {
                collect_reads(*s.rhs, scope, reads);
                // indices of the lvalue are reads; the base is a write
                if (s.lhs->kind == ExprKind::Concat) {
                    for (const auto& part : s.lhs->args) {
                        auto it = scope.nets.find(part->text);
                        if (it != scope.nets.end()) writes.insert(it->second);
                        for (const auto& a : part->args) collect_reads(*a, scope, reads);
                    }
                } else {
                    auto it = scope.nets.find(s.lhs->text);
                    if (it != scope.nets.end()) writes.insert(it->second);
                    for (const auto& a : s.lhs->args) collect_reads(*a, scope, reads);
                }
                return;
            }
            case StmtKind::If:
                collect_reads(*s.cond, scope, reads);
                collect_stmt_reads(*s.then_branch, scope, reads, writes);
                if (s.else_branch) collect_stmt_reads(*s.else_branch, scope, reads, writes);
                return;
            case StmtKind::Case:
                collect_reads(*s.cond, scope, reads);
                for (const auto& item : s.case_items) {
                    for (const auto& l : item.labels) collect_reads(*l, scope, reads);
                    collect_stmt_reads(*item.body, scope, reads, writes);
                }
                return;
            case StmtKind::For:
                collect_stmt_reads(*s.init, scope, reads, writes);
                collect_reads(*s.cond, scope, reads);
                collect_stmt_reads(*s.step, scope, reads, writes);
                collect_stmt_reads(*s.then_branch, scope, reads, writes);
                return;
            case StmtKind::Display:
                for (const auto& a : s.args) collect_reads(*a, scope, reads);
                return;
            default:
                if (s.then_branch) collect_stmt_reads(*s.then_branch, scope, reads, writes);
                return;
        }
    }

    void wire_sensitivity() {
        for (size_t i = 0; i < design_.handlers.size(); i++) {
            Handler& h = design_.handlers[i];
            if (h.kind == HandlerKind::ContAssign) {
                std::set<size_t> reads;
                collect_reads(*h.rhs, *h.rhs_scope, reads);
                if (h.lhs->kind == ExprKind::Concat) {
                    for (const auto& part : h.lhs->args)
                        for (const auto& a : part->args) collect_reads(*a, *h.lhs_scope, reads);
                } else {
                    for (const auto& a : h.lhs->args) collect_reads(*a, *h.lhs_scope, reads);
                }
                for (size_t n : reads) design_.nets[n].comb_handlers.push_back(i);
            } else if (h.kind == HandlerKind::CombBlock) {
                std::set<size_t> reads, writes;
                collect_stmt_reads(*h.body, *h.rhs_scope, reads, writes);
                for (size_t n : reads)
                    if (!writes.count(n)) design_.nets[n].comb_handlers.push_back(i);
            } else if (h.kind == HandlerKind::EdgeBlock) {
                for (const auto& ev : h.events) {
                    auto it = h.rhs_scope->nets.find(ev.signal);
                    if (it != h.rhs_scope->nets.end())
                        design_.nets[it->second].edge_handlers.push_back({i, ev.edge});
                }
            }
        }
    }

    std::unordered_map<std::string, const Module*> by_name_;
    std::vector<Diagnostic>& diags_;
    Design design_;
};

inline Design elaborate(const std::vector<Module>& modules, std::vector<Diagnostic>& diags) {
    return Elaborator(modules, diags).elaborate();
}

} // namespace minivl
