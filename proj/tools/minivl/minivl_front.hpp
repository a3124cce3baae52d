#pragma once

// minivl: a small Verilog-2001 subset compiler and event-driven simulator,
// bundled so the harness can run end-to-end where Icarus Verilog is not
// installed. The dialect covers what the fixture designs and testbenches
// need:
//   - modules with ANSI or non-ANSI ports, wire/reg/integer declarations,
//     parameters/localparams, vector ranges, module instantiation
//   - continuous assigns; always @(edge list), always @(*), always #N;
//     initial blocks with delays and event waits
//   - begin/end, if/else, case, for, blocking/nonblocking assignment,
//     $display/$write, $finish
//   - 4-state values, concatenation/replication, bit/part/indexed selects,
//     the usual operators
// Out of dialect: tasks/functions, generate, memories, strengths, real,
// signed arithmetic, specify blocks, timescale semantics (delays are ticks).

#include <cctype>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace minivl {

struct Diagnostic {
    std::string file;
    int line = 0;
    std::string message;

    std::string str() const {
        return file + ":" + std::to_string(line) + ": error: " + message;
    }
};

class compile_failure : public std::runtime_error {
public:
    explicit compile_failure(std::vector<Diagnostic> diags)
        : std::runtime_error(render(diags)), diagnostics(std::move(diags)) {}
    std::vector<Diagnostic> diagnostics;

private:
    static std::string render(const std::vector<Diagnostic>& diags) {
        std::string out;
        for (const auto& d : diags) out += d.str() + "\n";
        return out;
    }
};

// ---------------------------------------------------------------- lexer

enum class Tok { Ident, Keyword, Number, String, Punct, Eof };

struct Token {
    Tok kind = Tok::Eof;
    std::string text;
    std::string file;
    int line = 0;
};

inline bool is_keyword(const std::string& s) {
    static const char* words[] = {
        "module", "endmodule", "input", "output", "inout", "wire", "reg", "integer",
        "parameter", "localparam", "assign", "always", "initial", "begin", "end",
        "if", "else", "case", "casez", "casex", "endcase", "default", "for", "while",
        "forever", "repeat", "posedge", "negedge", "or", "task", "function", "generate",
    };
    for (const char* w : words)
        if (s == w) return true;
    return false;
}

class Lexer {
public:
    Lexer(std::string source, std::string filename)
        : src_(std::move(source)), file_(std::move(filename)) {}

    std::vector<Token> tokenize(std::vector<Diagnostic>& diags) {
        std::vector<Token> tokens;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\n') {
                line_++;
                pos_++;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                pos_++;
                continue;
            }
            if (c == '/' && peek(1) == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') pos_++;
                continue;
            }
            if (c == '/' && peek(1) == '*') {
                pos_ += 2;
                while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/')) {
                    if (src_[pos_] == '\n') line_++;
                    pos_++;
                }
                pos_ = std::min(pos_ + 2, src_.size());
                continue;
            }
            if (c == '`') { // compiler directives: skip the rest of the line
                while (pos_ < src_.size() && src_[pos_] != '\n') pos_++;
                continue;
            }
            if (c == '(' && peek(1) == '*' && peek(2) != ')') { // attribute, not @(*)
                pos_ += 2;
                while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == ')')) {
                    if (src_[pos_] == '\n') line_++;
                    pos_++;
                }
                pos_ = std::min(pos_ + 2, src_.size());
                continue;
            }
            if (c == '"') {
                tokens.push_back(lex_string(diags));
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
                size_t start = pos_;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' ||
                        src_[pos_] == '$'))
                    pos_++;
                std::string word = src_.substr(start, pos_ - start);
                tokens.push_back({is_keyword(word) ? Tok::Keyword : Tok::Ident, word, file_, line_});
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '\'') {
                tokens.push_back(lex_number());
                continue;
            }
            tokens.push_back(lex_punct());
        }
        tokens.push_back({Tok::Eof, "", file_, line_});
        return tokens;
    }

private:
    char peek(size_t ahead) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }

    Token lex_string(std::vector<Diagnostic>& diags) {
        int start_line = line_;
        pos_++; // opening quote
        std::string value;
        while (pos_ < src_.size() && src_[pos_] != '"') {
            char c = src_[pos_++];
            if (c == '\\' && pos_ < src_.size()) {
                char esc = src_[pos_++];
                switch (esc) {
                    case 'n': value += '\n'; break;
                    case 't': value += '\t'; break;
                    case '\\': value += '\\'; break;
                    case '"': value += '"'; break;
                    default: value += esc; break;
                }
                continue;
            }
            if (c == '\n') line_++;
            value += c;
        }
        if (pos_ >= src_.size())
            diags.push_back({file_, start_line, "unterminated string literal"});
        else
            pos_++; // closing quote
        return {Tok::String, value, file_, start_line};
    }

    Token lex_number() {
        size_t start = pos_;
        int start_line = line_;
        auto digits = [&] {
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' ||
                    src_[pos_] == '?'))
                pos_++;
        };
        if (src_[pos_] != '\'') {
            while (pos_ < src_.size() &&
                   (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                pos_++;
        }
        if (pos_ < src_.size() && src_[pos_] == '\'') {
            pos_++;
            if (pos_ < src_.size() && (src_[pos_] == 's' || src_[pos_] == 'S')) pos_++;
            if (pos_ < src_.size()) pos_++; // base letter
            digits();
        }
        return {Tok::Number, src_.substr(start, pos_ - start), file_, start_line};
    }

    Token lex_punct() {
        int start_line = line_;
        static const char* multi[] = {"<<<", ">>>", "===", "!==", "<=", ">=", "==", "!=",
                                      "&&", "||", "<<", ">>", "+:", "-:"};
        for (const char* op : multi) {
            size_t n = std::char_traits<char>::length(op);
            if (src_.compare(pos_, n, op) == 0) {
                pos_ += n;
                return {Tok::Punct, op, file_, start_line};
            }
        }
        std::string one(1, src_[pos_++]);
        return {Tok::Punct, one, file_, start_line};
    }

    std::string src_;
    std::string file_;
    size_t pos_ = 0;
    int line_ = 1;
};

// ------------------------------------------------------------------ AST

struct Expr;
using ExprPtr = std::shared_ptr<Expr>;

enum class ExprKind {
    Number, String, Ident, BitSelect, PartSelect, IndexedSelect,
    Concat, Replicate, Unary, Binary, Ternary,
};

struct Expr {
    ExprKind kind;
    std::string file;
    int line = 0;

    // Number: raw literal text; String: bytes; Ident/select base: name
    std::string text;
    std::string op;              // Unary/Binary operator spelling
    std::vector<ExprPtr> args;   // operands / concat parts / select indices
};

enum class StmtKind {
    Block, Assign, If, Case, For, Delay, EventWait, Display, Finish, Null,
};

enum class EdgeKind { Any, Pos, Neg };

struct EventItem {
    EdgeKind edge = EdgeKind::Any;
    std::string signal;
};

struct Stmt;
using StmtPtr = std::shared_ptr<Stmt>;

struct CaseItem {
    std::vector<ExprPtr> labels; // empty = default
    StmtPtr body;
};

struct Stmt {
    StmtKind kind;
    std::string file;
    int line = 0;

    std::vector<StmtPtr> body;      // Block
    ExprPtr lhs, rhs;               // Assign (lhs is an lvalue-shaped Expr)
    bool nonblocking = false;
    ExprPtr cond;                   // If / Case selector / For condition
    StmtPtr then_branch, else_branch;
    std::vector<CaseItem> case_items;
    StmtPtr init, step;             // For
    uint64_t delay = 0;             // Delay
    std::vector<EventItem> events;  // EventWait
    std::string format;             // Display format string
    std::vector<ExprPtr> args;      // Display args
    bool newline = true;            // $display vs $write
};

enum class Dir { None, Input, Output };

struct NetDecl {
    std::string name;
    std::string file;
    int line = 0;
    bool is_reg = false;
    bool is_integer = false;
    Dir dir = Dir::None;
    bool has_range = false;
    ExprPtr msb, lsb;
    ExprPtr init; // optional declaration initializer
};

struct ParamDecl {
    std::string name;
    ExprPtr value;
    std::string file;
    int line = 0;
};

struct ContAssign {
    ExprPtr lhs;
    ExprPtr rhs;
    std::string file;
    int line = 0;
};

enum class AlwaysKind { EdgeList, Star, Periodic };

struct AlwaysBlock {
    AlwaysKind kind = AlwaysKind::Star;
    std::vector<EventItem> events; // EdgeList
    uint64_t period = 0;           // Periodic
    StmtPtr body;
    std::string file;
    int line = 0;
};

struct PortConnection {
    std::string port; // empty for positional
    ExprPtr expr;     // may be null (unconnected)
};

struct Instance {
    std::string module_name;
    std::string instance_name;
    std::vector<PortConnection> connections;
    bool named = false;
    std::string file;
    int line = 0;
};

struct Module {
    std::string name;
    std::vector<std::string> port_order;
    std::vector<NetDecl> nets;
    std::vector<ParamDecl> params;
    std::vector<ContAssign> assigns;
    std::vector<AlwaysBlock> always_blocks;
    std::vector<StmtPtr> initial_blocks;
    std::vector<Instance> instances;
    std::string file;
    int line = 0;
};

// --------------------------------------------------------------- parser

class parse_abort : public std::exception {};

class Parser {
public:
    Parser(std::vector<Token> tokens, std::vector<Diagnostic>& diags)
        : tokens_(std::move(tokens)), diags_(diags) {}

    std::vector<Module> parse_file() {
        std::vector<Module> modules;
        while (!at_eof()) {
            if (accept_keyword("module")) {
                try {
                    modules.push_back(parse_module());
                } catch (const parse_abort&) {
                    // resync to the next module
                    while (!at_eof() && !check_keyword("module")) advance();
                }
            } else {
                fail(peek(), "expected 'module', found '" + peek().text + "'");
                advance();
                while (!at_eof() && !check_keyword("module")) advance();
            }
        }
        return modules;
    }

private:
    // -- token plumbing
    const Token& peek(size_t ahead = 0) const {
        size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
        return tokens_[i];
    }
    const Token& advance() { return tokens_[std::min(pos_++, tokens_.size() - 1)]; }
    bool at_eof() const { return peek().kind == Tok::Eof; }

    bool check_punct(const std::string& p) const {
        return peek().kind == Tok::Punct && peek().text == p;
    }
    bool check_keyword(const std::string& k) const {
        return peek().kind == Tok::Keyword && peek().text == k;
    }
    bool accept_punct(const std::string& p) {
        if (!check_punct(p)) return false;
        advance();
        return true;
    }
    bool accept_keyword(const std::string& k) {
        if (!check_keyword(k)) return false;
        advance();
        return true;
    }
    void expect_punct(const std::string& p) {
        if (!accept_punct(p)) {
            fail(peek(), "expected '" + p + "', found '" + describe(peek()) + "'");
            throw parse_abort{};
        }
    }
    std::string expect_ident(const char* what) {
        if (peek().kind != Tok::Ident) {
            fail(peek(), std::string("expected ") + what + ", found '" + describe(peek()) + "'");
            throw parse_abort{};
        }
        return advance().text;
    }
    static std::string describe(const Token& t) {
        return t.kind == Tok::Eof ? "end of file" : t.text;
    }
    void fail(const Token& at, const std::string& message) {
        diags_.push_back({at.file, at.line, message});
    }

    // -- grammar
    Module parse_module() {
        Module m;
        m.file = peek().file;
        m.line = peek().line;
        m.name = expect_ident("module name");
        if (accept_punct("(")) parse_port_list(m);
        expect_punct(";");
        while (!at_eof() && !check_keyword("endmodule")) parse_item(m);
        if (!accept_keyword("endmodule")) {
            fail(peek(), "missing 'endmodule' for module '" + m.name + "'");
            throw parse_abort{};
        }
        return m;
    }

    void parse_port_list(Module& m) {
        if (accept_punct(")")) return;
        Dir dir = Dir::None;
        bool is_reg = false;
        bool has_range = false;
        ExprPtr msb, lsb;
        while (true) {
            if (check_keyword("input") || check_keyword("output") || check_keyword("inout")) {
                std::string d = advance().text;
                if (d == "inout") fail(peek(), "inout ports are not supported");
                dir = d == "input" ? Dir::Input : Dir::Output;
                is_reg = accept_keyword("reg");
                if (accept_keyword("wire")) is_reg = false;
                has_range = false;
                msb = lsb = nullptr;
                if (accept_punct("[")) {
                    has_range = true;
                    msb = parse_expr();
                    expect_punct(":");
                    lsb = parse_expr();
                    expect_punct("]");
                }
            }
            Token name_tok = peek();
            std::string name = expect_ident("port name");
            m.port_order.push_back(name);
            if (dir != Dir::None) {
                NetDecl decl;
                decl.name = name;
                decl.file = name_tok.file;
                decl.line = name_tok.line;
                decl.dir = dir;
                decl.is_reg = is_reg;
                decl.has_range = has_range;
                decl.msb = msb;
                decl.lsb = lsb;
                m.nets.push_back(std::move(decl));
            }
            if (accept_punct(",")) continue;
            expect_punct(")");
            break;
        }
    }

    void parse_item(Module& m) {
        const Token& t = peek();
        if (t.kind == Tok::Keyword) {
            if (t.text == "input" || t.text == "output") return parse_direction_decl(m);
            if (t.text == "wire" || t.text == "reg") return parse_net_decl(m, advance().text == "reg", Dir::None);
            if (t.text == "integer") return parse_integer_decl(m);
            if (t.text == "parameter" || t.text == "localparam") return parse_param_decl(m);
            if (t.text == "assign") return parse_cont_assign(m);
            if (t.text == "always") return parse_always(m);
            if (t.text == "initial") {
                advance();
                m.initial_blocks.push_back(parse_statement());
                return;
            }
            if (t.text == "task" || t.text == "function" || t.text == "generate") {
                fail(t, "'" + t.text + "' is not supported");
                throw parse_abort{};
            }
            fail(t, "unexpected '" + t.text + "' in module body");
            advance();
            return;
        }
        if (t.kind == Tok::Ident) return parse_instance(m);
        fail(t, "unexpected '" + describe(t) + "' in module body");
        advance();
    }

    // non-ANSI: input [3:0] a, b;  (also: output reg [7:0] y;)
    void parse_direction_decl(Module& m) {
        Dir dir = advance().text == "input" ? Dir::Input : Dir::Output;
        bool is_reg = accept_keyword("reg");
        if (accept_keyword("wire")) is_reg = false;
        parse_net_decl(m, is_reg, dir);
    }

    void parse_net_decl(Module& m, bool is_reg, Dir dir) {
        bool has_range = false;
        ExprPtr msb, lsb;
        if (accept_punct("[")) {
            has_range = true;
            msb = parse_expr();
            expect_punct(":");
            lsb = parse_expr();
            expect_punct("]");
        }
        while (true) {
            Token name_tok = peek();
            NetDecl decl;
            decl.name = expect_ident("net name");
            decl.file = name_tok.file;
            decl.line = name_tok.line;
            decl.is_reg = is_reg;
            decl.dir = dir;
            decl.has_range = has_range;
            decl.msb = msb;
            decl.lsb = lsb;
            if (accept_punct("[")) {
                fail(name_tok, "memories (arrays) are not supported");
                throw parse_abort{};
            }
            if (accept_punct("=")) decl.init = parse_expr();
            m.nets.push_back(std::move(decl));
            if (accept_punct(",")) continue;
            expect_punct(";");
            break;
        }
    }

    void parse_integer_decl(Module& m) {
        advance();
        while (true) {
            Token name_tok = peek();
            NetDecl decl;
            decl.name = expect_ident("integer name");
            decl.file = name_tok.file;
            decl.line = name_tok.line;
            decl.is_reg = true;
            decl.is_integer = true;
            if (accept_punct("=")) decl.init = parse_expr();
            m.nets.push_back(std::move(decl));
            if (accept_punct(",")) continue;
            expect_punct(";");
            break;
        }
    }

    void parse_param_decl(Module& m) {
        advance();
        if (accept_punct("[")) { // parameter range: parsed and ignored for width
            parse_expr();
            expect_punct(":");
            parse_expr();
            expect_punct("]");
        }
        while (true) {
            Token name_tok = peek();
            ParamDecl p;
            p.name = expect_ident("parameter name");
            p.file = name_tok.file;
            p.line = name_tok.line;
            expect_punct("=");
            p.value = parse_expr();
            m.params.push_back(std::move(p));
            if (accept_punct(",")) continue;
            expect_punct(";");
            break;
        }
    }

    void parse_cont_assign(Module& m) {
        advance();
        while (true) {
            ContAssign a;
            a.file = peek().file;
            a.line = peek().line;
            a.lhs = parse_lvalue();
            expect_punct("=");
            a.rhs = parse_expr();
            m.assigns.push_back(std::move(a));
            if (accept_punct(",")) continue;
            expect_punct(";");
            break;
        }
    }

    void parse_always(Module& m) {
        AlwaysBlock blk;
        blk.file = peek().file;
        blk.line = peek().line;
        advance();
        if (accept_punct("@")) {
            if (accept_punct("*")) {
                blk.kind = AlwaysKind::Star;
            } else {
                expect_punct("(");
                if (accept_punct("*")) {
                    blk.kind = AlwaysKind::Star;
                    expect_punct(")");
                } else {
                    blk.kind = AlwaysKind::EdgeList;
                    blk.events = parse_event_list();
                    expect_punct(")");
                }
            }
        } else if (accept_punct("#")) {
            blk.kind = AlwaysKind::Periodic;
            blk.period = parse_delay_amount();
        } else {
            fail(peek(), "free-running 'always' without @ or # is not supported");
            throw parse_abort{};
        }
        blk.body = parse_statement();
        m.always_blocks.push_back(std::move(blk));
    }

    std::vector<EventItem> parse_event_list() {
        std::vector<EventItem> events;
        while (true) {
            EventItem item;
            if (accept_keyword("posedge")) item.edge = EdgeKind::Pos;
            else if (accept_keyword("negedge")) item.edge = EdgeKind::Neg;
            item.signal = expect_ident("signal name");
            events.push_back(std::move(item));
            if (accept_keyword("or") || accept_punct(",")) continue;
            break;
        }
        return events;
    }

    uint64_t parse_delay_amount() {
        if (peek().kind != Tok::Number) {
            fail(peek(), "expected a delay amount");
            throw parse_abort{};
        }
        std::string text = advance().text;
        uint64_t value = 0;
        for (char c : text) {
            if (c == '_') continue;
            if (!std::isdigit(static_cast<unsigned char>(c))) {
                fail(peek(), "delay must be a plain decimal number");
                throw parse_abort{};
            }
            value = value * 10 + static_cast<uint64_t>(c - '0');
        }
        return value;
    }

    void parse_instance(Module& m) {
        Instance inst;
        inst.file = peek().file;
        inst.line = peek().line;
        inst.module_name = advance().text;
        inst.instance_name = expect_ident("instance name");
        expect_punct("(");
        if (!accept_punct(")")) {
            inst.named = check_punct(".");
            while (true) {
                PortConnection conn;
                if (accept_punct(".")) {
                    conn.port = expect_ident("port name");
                    expect_punct("(");
                    if (!check_punct(")")) conn.expr = parse_expr();
                    expect_punct(")");
                } else {
                    conn.expr = parse_expr();
                }
                inst.connections.push_back(std::move(conn));
                if (accept_punct(",")) continue;
                expect_punct(")");
                break;
            }
        }
        expect_punct(";");
        m.instances.push_back(std::move(inst));
    }

    // -- statements
    StmtPtr make_stmt(StmtKind kind) {
        auto s = std::make_shared<Stmt>();
        s->kind = kind;
        s->file = peek().file;
        s->line = peek().line;
        return s;
    }

    StmtPtr parse_statement() {
        if (check_keyword("begin")) {
            auto s = make_stmt(StmtKind::Block);
            advance();
            if (accept_punct(":")) expect_ident("block label");
            while (!at_eof() && !check_keyword("end")) s->body.push_back(parse_statement());
            if (!accept_keyword("end")) {
                fail(peek(), "missing 'end'");
                throw parse_abort{};
            }
            return s;
        }
        if (check_keyword("if")) {
            auto s = make_stmt(StmtKind::If);
            advance();
            expect_punct("(");
            s->cond = parse_expr();
            expect_punct(")");
            s->then_branch = parse_statement();
            if (accept_keyword("else")) s->else_branch = parse_statement();
            return s;
        }
        if (check_keyword("case") || check_keyword("casez") || check_keyword("casex")) {
            if (!check_keyword("case")) fail(peek(), "casez/casex are not supported; use case");
            auto s = make_stmt(StmtKind::Case);
            advance();
            expect_punct("(");
            s->cond = parse_expr();
            expect_punct(")");
            while (!at_eof() && !check_keyword("endcase")) {
                CaseItem item;
                if (accept_keyword("default")) {
                    accept_punct(":");
                } else {
                    item.labels.push_back(parse_expr());
                    while (accept_punct(",")) item.labels.push_back(parse_expr());
                    expect_punct(":");
                }
                item.body = parse_statement();
                s->case_items.push_back(std::move(item));
            }
            if (!accept_keyword("endcase")) {
                fail(peek(), "missing 'endcase'");
                throw parse_abort{};
            }
            return s;
        }
        if (check_keyword("for")) {
            auto s = make_stmt(StmtKind::For);
            advance();
            expect_punct("(");
            s->init = parse_assign_core(false);
            expect_punct(";");
            s->cond = parse_expr();
            expect_punct(";");
            s->step = parse_assign_core(false);
            expect_punct(")");
            s->then_branch = parse_statement();
            return s;
        }
        if (check_keyword("while") || check_keyword("forever") || check_keyword("repeat")) {
            fail(peek(), "'" + peek().text + "' loops are not supported");
            throw parse_abort{};
        }
        if (check_punct("#")) {
            auto s = make_stmt(StmtKind::Delay);
            advance();
            s->delay = parse_delay_amount();
            if (!accept_punct(";")) s->then_branch = parse_statement();
            return s;
        }
        if (check_punct("@")) {
            auto s = make_stmt(StmtKind::EventWait);
            advance();
            expect_punct("(");
            s->events = parse_event_list();
            expect_punct(")");
            if (!accept_punct(";")) s->then_branch = parse_statement();
            return s;
        }
        if (peek().kind == Tok::Ident && peek().text[0] == '$') return parse_system_call();
        if (accept_punct(";")) return make_stmt(StmtKind::Null);

        auto s = parse_assign_core(true);
        expect_punct(";");
        return s;
    }

    StmtPtr parse_assign_core(bool allow_nonblocking) {
        auto s = make_stmt(StmtKind::Assign);
        s->lhs = parse_lvalue();
        if (accept_punct("<=")) {
            if (!allow_nonblocking) fail(peek(), "nonblocking assignment is not allowed here");
            s->nonblocking = true;
        } else {
            expect_punct("=");
        }
        s->rhs = parse_expr();
        return s;
    }

    StmtPtr parse_system_call() {
        Token t = advance();
        if (t.text == "$finish" || t.text == "$stop") {
            auto s = make_stmt(StmtKind::Finish);
            if (accept_punct("(")) expect_punct(")");
            expect_punct(";");
            return s;
        }
        if (t.text == "$display" || t.text == "$write") {
            auto s = make_stmt(StmtKind::Display);
            s->newline = t.text == "$display";
            expect_punct("(");
            if (peek().kind != Tok::String) {
                fail(peek(), t.text + " needs a format string first");
                throw parse_abort{};
            }
            s->format = advance().text;
            while (accept_punct(",")) s->args.push_back(parse_expr());
            expect_punct(")");
            expect_punct(";");
            return s;
        }
        // $dumpfile/$dumpvars/$monitor and friends: accept and ignore
        if (accept_punct("(")) {
            int depth = 1;
            while (!at_eof() && depth > 0) {
                if (check_punct("(")) depth++;
                if (check_punct(")")) depth--;
                advance();
            }
        }
        expect_punct(";");
        return make_stmt(StmtKind::Null);
    }

    // -- expressions
    ExprPtr make_expr(ExprKind kind) {
        auto e = std::make_shared<Expr>();
        e->kind = kind;
        e->file = peek().file;
        e->line = peek().line;
        return e;
    }

    ExprPtr parse_lvalue() {
        if (check_punct("{")) {
            auto e = make_expr(ExprKind::Concat);
            advance();
            e->args.push_back(parse_lvalue());
            while (accept_punct(",")) e->args.push_back(parse_lvalue());
            expect_punct("}");
            return e;
        }
        Token name_tok = peek();
        std::string name = expect_ident("assignment target");
        return parse_select_suffix(name, name_tok);
    }

    ExprPtr parse_select_suffix(const std::string& name, const Token& at) {
        if (!check_punct("[")) {
            auto e = make_expr(ExprKind::Ident);
            e->file = at.file;
            e->line = at.line;
            e->text = name;
            return e;
        }
        advance();
        ExprPtr first = parse_expr();
        if (accept_punct(":")) {
            auto e = make_expr(ExprKind::PartSelect);
            e->text = name;
            e->args = {first, parse_expr()};
            expect_punct("]");
            return e;
        }
        if (accept_punct("+:")) {
            auto e = make_expr(ExprKind::IndexedSelect);
            e->text = name;
            e->args = {first, parse_expr()};
            expect_punct("]");
            return e;
        }
        auto e = make_expr(ExprKind::BitSelect);
        e->text = name;
        e->args = {first};
        expect_punct("]");
        return e;
    }

    ExprPtr parse_expr() { return parse_ternary(); }

    ExprPtr parse_ternary() {
        ExprPtr cond = parse_binary(0);
        if (!accept_punct("?")) return cond;
        auto e = make_expr(ExprKind::Ternary);
        ExprPtr then_val = parse_expr();
        expect_punct(":");
        ExprPtr else_val = parse_expr();
        e->args = {cond, then_val, else_val};
        return e;
    }

    int binary_level(const std::string& op) const {
        if (op == "||") return 1;
        if (op == "&&") return 2;
        if (op == "|") return 3;
        if (op == "^") return 4;
        if (op == "&") return 5;
        if (op == "==" || op == "!=" || op == "===" || op == "!==") return 6;
        if (op == "<" || op == "<=" || op == ">" || op == ">=") return 7;
        if (op == "<<" || op == ">>" || op == "<<<" || op == ">>>") return 8;
        if (op == "+" || op == "-") return 9;
        if (op == "*" || op == "/" || op == "%") return 10;
        return 0;
    }

    ExprPtr parse_binary(int min_level) {
        ExprPtr left = parse_unary();
        while (peek().kind == Tok::Punct) {
            int level = binary_level(peek().text);
            if (level == 0 || level < min_level) break;
            auto e = make_expr(ExprKind::Binary);
            e->op = advance().text;
            ExprPtr right = parse_binary(level + 1);
            e->args = {left, right};
            left = e;
        }
        return left;
    }

    ExprPtr parse_unary() {
        if (peek().kind == Tok::Punct) {
            const std::string& op = peek().text;
            if (op == "!" || op == "~" || op == "&" || op == "|" || op == "^" || op == "-" ||
                op == "+") {
                auto e = make_expr(ExprKind::Unary);
                e->op = advance().text;
                e->args = {parse_unary()};
                return e;
            }
        }
        return parse_primary();
    }

    ExprPtr parse_primary() {
        if (peek().kind == Tok::Number) {
            auto e = make_expr(ExprKind::Number);
            e->text = advance().text;
            // a based literal may be split into "<size>" "'b..." by spacing
            return e;
        }
        if (peek().kind == Tok::String) {
            auto e = make_expr(ExprKind::String);
            e->text = advance().text;
            return e;
        }
        if (accept_punct("(")) {
            ExprPtr inner = parse_expr();
            expect_punct(")");
            return inner;
        }
        if (check_punct("{")) {
            advance();
            ExprPtr first = parse_expr();
            if (check_punct("{")) { // replication {N{expr}}
                advance();
                auto e = make_expr(ExprKind::Replicate);
                e->args.push_back(first);
                e->args.push_back(parse_expr());
                while (accept_punct(",")) e->args.push_back(parse_expr());
                expect_punct("}");
                expect_punct("}");
                return e;
            }
            auto e = make_expr(ExprKind::Concat);
            e->args.push_back(first);
            while (accept_punct(",")) e->args.push_back(parse_expr());
            expect_punct("}");
            return e;
        }
        if (peek().kind == Tok::Ident) {
            Token t = advance();
            return parse_select_suffix(t.text, t);
        }
        fail(peek(), "expected an expression, found '" + describe(peek()) + "'");
        throw parse_abort{};
    }

    std::vector<Token> tokens_;
    std::vector<Diagnostic>& diags_;
    size_t pos_ = 0;
};

struct SourceFile {
    std::string name;
    std::string text;
};

inline std::vector<Module> parse_sources(const std::vector<SourceFile>& files,
                                         std::vector<Diagnostic>& diags) {
    std::vector<Module> modules;
    for (const auto& f : files) {
        Lexer lexer(f.text, f.name);
        Parser parser(lexer.tokenize(diags), diags);
        auto parsed = parser.parse_file();
        for (auto& m : parsed) modules.push_back(std::move(m));
    }
    return modules;
}

} // namespace minivl
