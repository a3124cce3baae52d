#include <catch2/catch_amalgamated.hpp>

#include "veriloop/corpus.hpp"
#include "test_util.hpp"

using namespace veriloop;
using testutil::TempDir;

namespace {

const char* kPrompt = R"(// Two-input AND gate.
module top_module (input a, input b, output y);
    // Insert your code here
endmodule
)";

const char* kBench = R"(module tb;
    reg a, b;
    wire y;
    top_module dut (.a(a), .b(b), .y(y));
endmodule
)";

void write_problem(const TempDir& dir, const std::string& id,
                   const std::string& meta = "") {
    dir.write(id + "/prompt.v", kPrompt);
    dir.write(id + "/tb.v", kBench);
    if (!meta.empty()) dir.write(id + "/meta", meta);
}

} // namespace

TEST_CASE("load_problem populates all fields") {
    TempDir dir("corpus");
    write_problem(dir, "and_gate", "category_major=Comb. Circuits\ncategory_minor=Basic Gates\n");
    Problem p = load_problem(dir / "and_gate");
    CHECK(p.id == "and_gate");
    CHECK(p.category_major == "Comb. Circuits");
    CHECK(p.category_minor == "Basic Gates");
    CHECK(p.design_prompt == kPrompt);
    CHECK(p.testbench_source == kBench);
    CHECK(p.top_module_name == "top_module");
}

TEST_CASE("load_problem meta overrides top module") {
    TempDir dir("corpus");
    write_problem(dir, "adder", "top_module=adder4\n# a comment\n\n");
    CHECK(load_problem(dir / "adder").top_module_name == "adder4");
}

TEST_CASE("load_problem missing testbench names the file") {
    TempDir dir("corpus");
    dir.write("broken/prompt.v", kPrompt);
    try {
        load_problem(dir / "broken");
        FAIL("expected missing_file_error");
    } catch (const missing_file_error& e) {
        CHECK(e.filename == "tb.v");
    }
}

TEST_CASE("load_problem rejects empty and module-less prompts") {
    TempDir dir("corpus");
    dir.write("empty/prompt.v", "  \n\t\n");
    dir.write("empty/tb.v", kBench);
    CHECK_THROWS_AS(load_problem(dir / "empty"), empty_prompt_error);

    dir.write("nomod/prompt.v", "just a description, no skeleton");
    dir.write("nomod/tb.v", kBench);
    CHECK_THROWS_AS(load_problem(dir / "nomod"), corpus_error);
}

TEST_CASE("load_problem reports malformed meta with line number") {
    TempDir dir("corpus");
    write_problem(dir, "p", "category_major=X\nnot a key value pair\n");
    try {
        load_problem(dir / "p");
        FAIL("expected invalid_meta_error");
    } catch (const invalid_meta_error& e) {
        CHECK(e.line == 2);
    }
}

TEST_CASE("load_problem rejects invalid UTF-8") {
    TempDir dir("corpus");
    dir.write("bad/prompt.v", std::string("module m;\xFF\xFE endmodule"));
    dir.write("bad/tb.v", kBench);
    CHECK_THROWS_AS(load_problem(dir / "bad"), file_error);
}

TEST_CASE("load_problem is deterministic") {
    TempDir dir("corpus");
    write_problem(dir, "same");
    Problem a = load_problem(dir / "same");
    Problem b = load_problem(dir / "same");
    CHECK(a.design_prompt == b.design_prompt);
    CHECK(a.testbench_source == b.testbench_source);
    CHECK(a.id == b.id);
}

TEST_CASE("load_corpus returns sorted problems and collects partial failures") {
    TempDir dir("corpus");
    write_problem(dir, "zeta");
    write_problem(dir, "alpha");
    write_problem(dir, "mid");
    dir.write("broken/prompt.v", kPrompt); // tb.v missing

    std::vector<CorpusLoadError> errors;
    auto problems = load_corpus(dir.path(), &errors);
    REQUIRE(problems.size() == 3);
    CHECK(problems[0].id == "alpha");
    CHECK(problems[1].id == "mid");
    CHECK(problems[2].id == "zeta");
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].directory == "broken");

    // strictly increasing ids
    for (size_t i = 1; i < problems.size(); i++) CHECK(problems[i - 1].id < problems[i].id);
}

TEST_CASE("load_corpus failure modes") {
    TempDir dir("corpus");
    CHECK_THROWS_AS(load_corpus(dir / "does-not-exist"), missing_file_error);
    CHECK_THROWS_AS(load_corpus(dir.path()), empty_corpus_error);
    dir.write("only-a-file.txt", "not a problem dir");
    CHECK_THROWS_AS(load_corpus(dir.path()), empty_corpus_error);
}

TEST_CASE("bundled fixture corpus loads cleanly") {
    std::vector<CorpusLoadError> errors;
    auto problems = load_corpus(testutil::fixtures_corpus(), &errors);
    CHECK(errors.empty());
    CHECK(problems.size() >= 6);
    for (const auto& p : problems) {
        INFO(p.id);
        CHECK(contains_token(p.design_prompt, "module"));
        CHECK(contains_token(p.testbench_source, "module"));
        CHECK_FALSE(p.top_module_name.empty());
    }
}
