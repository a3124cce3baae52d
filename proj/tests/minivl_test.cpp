#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "minivl/minivl.hpp"
#include "test_util.hpp"

namespace {

std::string run_sim(const std::vector<minivl::SourceFile>& files) {
    minivl::Design design = minivl::compile_sources(files);
    std::ostringstream out;
    minivl::Simulation sim(std::move(design), out);
    sim.run();
    return out.str();
}

std::string compile_errors(const std::vector<minivl::SourceFile>& files) {
    try {
        minivl::compile_sources(files);
        return {};
    } catch (const minivl::compile_failure& e) {
        return e.what();
    }
}

} // namespace

TEST_CASE("combinational gate with testbench") {
    std::string dut = R"(
module top_module (input a, input b, output y);
    assign y = a & b;
endmodule
)";
    std::string tb = R"(
module tb;
    reg a, b;
    wire y;
    integer i;
    reg [1:0] stim;
    top_module dut (.a(a), .b(b), .y(y));
    initial begin
        for (i = 0; i < 4; i = i + 1) begin
            stim = i;
            a = stim[1];
            b = stim[0];
            #1;
            $display("a=%b b=%b y=%b", a, b, y);
        end
        $finish;
    end
endmodule
)";
    std::string out = run_sim({{"module.v", dut}, {"tb.v", tb}});
    CHECK(out == "a=0 b=0 y=0\na=0 b=1 y=0\na=1 b=0 y=0\na=1 b=1 y=1\n");
}

TEST_CASE("clocked counter with synchronous reset and NBA semantics") {
    std::string dut = R"(
module top_module (input clk, input reset, output reg [3:0] count);
    always @(posedge clk) begin
        if (reset)
            count <= 4'b0000;
        else
            count <= count + 1;
    end
endmodule
)";
    std::string tb = R"(
module tb;
    reg clk, reset;
    wire [3:0] count;
    integer i;
    top_module dut (.clk(clk), .reset(reset), .count(count));
    always #5 clk = ~clk;
    initial begin
        clk = 0;
        reset = 1;
        @(posedge clk);
        #1;
        $display("after reset count=%b", count);
        reset = 0;
        for (i = 0; i < 3; i = i + 1) begin
            @(posedge clk);
            #1;
            $display("count=%b", count);
        end
        $finish;
    end
endmodule
)";
    std::string out = run_sim({{"module.v", dut}, {"tb.v", tb}});
    CHECK(out == "after reset count=0000\ncount=0001\ncount=0010\ncount=0011\n");
}

TEST_CASE("uninitialized regs read as x until driven") {
    std::string src = R"(
module tb;
    reg [3:0] v;
    wire [3:0] w;
    assign w = v | 4'b0001;
    initial begin
        #1;
        $display("v=%b w=%b", v, w);
        v = 4'b0000;
        #1;
        $display("v=%b w=%b", v, w);
        $finish;
    end
endmodule
)";
    std::string out = run_sim({{"tb.v", src}});
    CHECK(out == "v=xxxx w=xxx1\nv=0000 w=0001\n");
}

TEST_CASE("nonblocking assignments swap cleanly") {
    std::string src = R"(
module tb;
    reg clk;
    reg [7:0] a, b;
    always #5 clk = ~clk;
    always @(posedge clk) begin
        a <= b;
        b <= a;
    end
    initial begin
        clk = 0;
        a = 8'h0a;
        b = 8'hb0;
        @(posedge clk);
        #1;
        $display("a=%h b=%h", a, b);
        $finish;
    end
endmodule
)";
    CHECK(run_sim({{"tb.v", src}}) == "a=b0 b=0a\n");
}

TEST_CASE("concat lvalues, part selects, replication") {
    std::string src = R"(
module tb;
    reg [4:0] a, f;
    wire [31:0] concat;
    wire [7:0] w, z;
    wire cout;
    wire [3:0] sum;
    assign concat = {a, 5'b00000, 5'b11111, 5'b00000, 5'b10101, f, 2'b11};
    assign w = concat[31:24];
    assign z = concat[7:0];
    assign {cout, sum} = 4'b1111 + 4'b0001;
    initial begin
        a = 5'b10011;
        f = 5'b01110;
        #1;
        $display("w=%b z=%b concat26=%b rep=%b", w, z, concat[26], {3{2'b10}});
        $display("cout=%b sum=%b", cout, sum);
        $finish;
    end
endmodule
)";
    std::string out = run_sim({{"tb.v", src}});
    CHECK(out == "w=10011000 z=10111011 concat26=0 rep=101010\ncout=1 sum=0000\n");
}

TEST_CASE("case statement with default") {
    std::string src = R"(
module tb;
    integer i;
    reg [1:0] sel;
    reg [7:0] out;
    initial begin
        for (i = 0; i < 4; i = i + 1) begin
            sel = i;
            case (sel)
                2'b00: out = 8'd10;
                2'b01, 2'b10: out = 8'd20;
                default: out = 8'd30;
            endcase
            $display("%0d -> %0d", i, out);
        end
        $finish;
    end
endmodule
)";
    CHECK(run_sim({{"tb.v", src}}) == "0 -> 10\n1 -> 20\n2 -> 20\n3 -> 30\n");
}

TEST_CASE("indexed part select reads a window") {
    std::string src = R"(
module tb;
    reg [29:0] flat;
    integer i;
    initial begin
        flat = 30'b000010001000110010000101_001101;
        for (i = 0; i < 3; i = i + 1)
            $display("%b", flat[i * 5 +: 5]);
        $finish;
    end
endmodule
)";
    CHECK(run_sim({{"tb.v", src}}) == "01101\n01010\n01000\n");
}

TEST_CASE("ternary and comparison operators") {
    std::string src = R"(
module tb;
    reg [3:0] a, b;
    initial begin
        a = 4'd9;
        b = 4'd4;
        $display("%0d %0d %0d %0d", a > b ? 1 : 0, a == b, a != b, (a - b));
        $display("%0d", a % b);
        $finish;
    end
endmodule
)";
    CHECK(run_sim({{"tb.v", src}}) == "1 0 1 5\n1\n");
}

TEST_CASE("wire used as procedural l-value is a compile error") {
    std::string src = R"(
module top_module (input clk, output done);
    always @(posedge clk) begin
        done = 1;
    end
endmodule
module tb;
    reg clk;
    wire done;
    top_module dut (.clk(clk), .done(done));
endmodule
)";
    std::string errors = compile_errors({{"tb.v", src}});
    CHECK(errors.find("'done' is used as an l-value but was declared as a wire") != std::string::npos);
    CHECK(errors.find("tb.v:4") != std::string::npos);
}

TEST_CASE("continuous assignment to a reg is a compile error") {
    std::string src = R"(
module tb;
    reg r;
    assign r = 1'b1;
endmodule
)";
    CHECK(compile_errors({{"tb.v", src}})
              .find("'r' is declared as a reg and cannot be driven by a continuous assignment") !=
          std::string::npos);
}

TEST_CASE("syntax and name errors carry file and line") {
    std::string bad = "module m(input a, output y);\n  asign y = a;\nendmodule\n";
    std::string errors = compile_errors({{"module.v", bad}});
    CHECK(errors.find("module.v:2") != std::string::npos);

    std::string undeclared = "module m(input a, output y);\n  assign y = a & ghost;\nendmodule\n";
    CHECK(compile_errors({{"module.v", undeclared}}).find("'ghost' is not declared") !=
          std::string::npos);

    std::string unknown = "module tb;\n  wire y;\n  nosuch dut (.y(y));\nendmodule\n";
    CHECK(compile_errors({{"tb.v", unknown}}).find("unknown module 'nosuch'") != std::string::npos);
}

TEST_CASE("port count and name mismatches are compile errors") {
    std::string base = "module child(input a, output y); assign y = a; endmodule\n";
    std::string too_many = base + "module tb; reg a; wire y; child c(a, y, a); endmodule\n";
    CHECK(compile_errors({{"tb.v", too_many}}).find("has 3 connections") != std::string::npos);

    std::string bad_name = base + "module tb; reg a; wire y; child c(.a(a), .nope(y)); endmodule\n";
    CHECK(compile_errors({{"tb.v", bad_name}}).find("no port named 'nope'") != std::string::npos);
}

TEST_CASE("non-ANSI ports and named blocks still elaborate") {
    std::string src = R"(
module top_module (a, b, y);
    input a, b;
    output y;
    wire y;
    assign y = a ^ b;
endmodule
module tb;
    reg a, b;
    wire y;
    top_module dut (a, b, y);
    initial begin : main
        a = 1; b = 0;
        #1;
        $display("y=%b", y);
        $finish;
    end
endmodule
)";
    CHECK(run_sim({{"tb.v", src}}) == "y=1\n");
}

TEST_CASE("always @(*) reevaluates on input changes") {
    std::string src = R"(
module tb;
    reg [1:0] sel;
    reg [3:0] out;
    always @(*) begin
        if (sel == 2'b00) out = 4'd1;
        else if (sel == 2'b01) out = 4'd2;
        else out = 4'd7;
    end
    initial begin
        sel = 0; #1; $display("%0d", out);
        sel = 1; #1; $display("%0d", out);
        sel = 3; #1; $display("%0d", out);
        $finish;
    end
endmodule
)";
    CHECK(run_sim({{"tb.v", src}}) == "1\n2\n7\n");
}

TEST_CASE("artifact round trip preserves sources") {
    std::string dir = std::filesystem::temp_directory_path() /
                      ("minivl-artifact-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    std::vector<minivl::SourceFile> files = {
        {"module.v", "module m(input a, output y); assign y = ~a; endmodule\n"},
        {"tb.v", "module tb; endmodule\n"}};
    std::string artifact = dir + "/sim.out";
    minivl::write_artifact(artifact, files);
    auto loaded = minivl::read_artifact(artifact);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].name == "module.v");
    CHECK(loaded[0].text == files[0].text);
    CHECK(loaded[1].text == files[1].text);
    CHECK_THROWS(minivl::read_artifact("/dev/null"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("x to 1 counts as a posedge") {
    std::string src = R"(
module tb;
    reg clk;
    reg [3:0] hits;
    always @(posedge clk) hits <= hits + 1;
    initial begin
        hits = 0;
        #1 clk = 1;   // x -> 1: posedge
        #1 clk = 0;   // 1 -> 0: negedge
        #1 clk = 1;   // 0 -> 1: posedge
        #1;
        $display("hits=%0d", hits);
        $finish;
    end
endmodule
)";
    CHECK(run_sim({{"tb.v", src}}) == "hits=2\n");
}

TEST_CASE("nonblocking chains read pre-edge values") {
    std::string src = R"(
module tb;
    reg clk;
    reg [7:0] a, b, c;
    always #5 clk = ~clk;
    always @(posedge clk) b <= a;
    always @(posedge clk) c <= b;
    initial begin
        clk = 0;
        a = 8'd1; b = 8'd2; c = 8'd3;
        @(posedge clk);
        #1;
        $display("%0d %0d %0d", a, b, c);
        $finish;
    end
endmodule
)";
    // one edge: b takes old a (1), c takes old b (2)
    CHECK(run_sim({{"tb.v", src}}) == "1 1 2\n");
}

TEST_CASE("part-select writes leave other bits alone") {
    std::string src = R"(
module tb;
    reg [7:0] v;
    initial begin
        v = 8'b10101010;
        v[3:0] = 4'b0110;
        $display("%b", v);
        v[7] = 1'b0;
        $display("%b", v);
        $finish;
    end
endmodule
)";
    CHECK(run_sim({{"tb.v", src}}) == "10100110\n00100110\n");
}

TEST_CASE("case labels match x bits exactly") {
    std::string src = R"(
module tb;
    reg [1:0] sel;
    initial begin
        case (sel)
            2'b00: $display("zero");
            2'bxx: $display("all-x");
            default: $display("other");
        endcase
        sel = 2'b01;
        case (sel)
            2'b00: $display("zero");
            2'bxx: $display("all-x");
            default: $display("other");
        endcase
        $finish;
    end
endmodule
)";
    CHECK(run_sim({{"tb.v", src}}) == "all-x\nother\n");
}

TEST_CASE("reduction, shift, and division corner cases") {
    std::string src = R"(
module tb;
    reg [3:0] v;
    reg [7:0] w;
    initial begin
        v = 4'b1011;
        $display("%b %b %b", &v, |v, ^v);
        v = 4'b1111;
        $display("%b", &v);
        w = 8'd7;
        $display("%b %b", w << 10, w >> 10);
        $display("%b", v / 4'd0);
        $display("%0d", v % 4'd2);
        $finish;
    end
endmodule
)";
    CHECK(run_sim({{"tb.v", src}}) ==
          "0 1 1\n1\n00000000 00000000\nxxxx\n1\n");
}

TEST_CASE("ternary with unknown condition merges agreeing bits") {
    std::string src = R"(
module tb;
    reg cond;
    reg [3:0] out;
    initial begin
        out = cond ? 4'b1100 : 4'b1010;
        $display("%b", out);
        $finish;
    end
endmodule
)";
    // cond is x: bits agree at position 3 (1) and 0 (0), differ elsewhere
    CHECK(run_sim({{"tb.v", src}}) == "1xx0\n");
}

TEST_CASE("undriven outputs read as z and survive into reports") {
    std::string dut = R"(
module top_module (input a, input b, output y);
endmodule
)";
    std::string tb = minivl::read_file_or_throw(
        (testutil::fixtures_corpus() / "and_gate" / "tb.v").string());
    std::string out = run_sim({{"module.v", dut}, {"tb.v", tb}});
    CHECK(out.find("Generated = [z]") != std::string::npos);
    CHECK(out.find("4 mismatches out of 4 total tests.") != std::string::npos);
}

TEST_CASE("event waits see edges from other modules") {
    std::string src = R"(
module ticker(input clk, output reg [3:0] n);
    always @(posedge clk) n <= n + 1;
endmodule
module tb;
    reg clk;
    wire [3:0] n;
    ticker t (.clk(clk), .n(n));
    always #2 clk = ~clk;
    initial begin
        clk = 0;
        @(negedge clk);
        $display("n=%b", n);
        $finish;
    end
endmodule
)";
    // n starts x; one posedge before the first negedge increments x+1 = x
    CHECK(run_sim({{"tb.v", src}}) == "n=xxxx\n");
}
