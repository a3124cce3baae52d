#pragma once

// Expected parse results for the golden sim-report corpus in tests/golden/.
// Shared by the unit suite and the acceptance suite.

#include <string>
#include <vector>

#include "veriloop/toolchain.hpp"

namespace golden {

struct Expected {
    std::string file;
    long mismatch_count;
    long total_tests;
    bool all_passed;
    std::vector<long> passed_tests;
    // position_kind, position, inputs/generated/reference element counts
    struct Rec {
        std::string kind;
        long position;
        size_t inputs, generated, reference;
    };
    std::vector<Rec> mismatches;
};

inline const std::vector<Expected>& corpus() {
    static const std::vector<Expected> table = {
        {"vector_concat_excerpt.txt", 13, 26, false, {12},
         {{"clk", 13, 6, 4, 4}, {"clk", 25, 6, 4, 4}}},
        {"index_checks.txt", 16, 21, false, {13, 14},
         {{"index", 5, 3, 2, 2}, {"index", 6, 3, 2, 2}, {"index", 7, 3, 2, 2},
          {"index", 8, 3, 2, 2}, {"index", 9, 3, 2, 2}, {"index", 10, 3, 2, 2},
          {"index", 11, 3, 2, 2}, {"index", 12, 3, 2, 2}, {"index", 15, 3, 2, 2},
          {"index", 16, 3, 2, 2}, {"index", 17, 3, 2, 2}, {"index", 18, 3, 2, 2},
          {"index", 19, 3, 2, 2}, {"index", 20, 3, 2, 2}}},
        {"all_passed_notice.txt", 0, 3, true, {1, 2, 3}, {}},
        {"all_passed_bare.txt", 0, 1, true, {1}, {}},
        {"zero_mismatch_summary.txt", 0, 8, true, {}, {}},
        {"single_fail.txt", 1, 1, false, {}, {{"clk", 1, 1, 1, 1}}},
        {"xz_states.txt", 1, 2, false, {1}, {{"clk", 2, 1, 2, 2}}},
        {"empty_inputs.txt", 1, 4, false, {}, {{"index", 3, 0, 1, 1}}},
        // first line has unequal generated/reference lengths: noise, not a record
        {"malformed_mismatch_kept_raw.txt", 2, 9, false, {}, {{"clk", 8, 1, 1, 1}}},
        {"interleaved_noise.txt", 1, 2, false, {1}, {{"clk", 2, 2, 1, 1}}},
        {"big_counts.txt", 100000, 100000, false, {}, {{"index", 999999, 1, 1, 1}}},
        {"last_summary_wins.txt", 5, 12, false, {}, {{"clk", 4, 1, 1, 1}}},
        {"summary_only.txt", 7, 20, false, {}, {}},
        {"trailing_whitespace.txt", 1, 5, false, {4}, {{"clk", 5, 1, 1, 1}}},
        {"crlf_lines.txt", 1, 2, false, {1}, {{"clk", 2, 1, 1, 1}}},
        {"finish_noise.txt", 0, 2, true, {1, 2}, {}},
        {"multi_word_positions.txt", 1, 30, false, {}, {{"cycle", 17, 1, 1, 1}}},
        {"sparse_passes.txt", 3, 6, false, {2, 4, 6},
         {{"clk", 1, 2, 2, 2}, {"clk", 3, 2, 2, 2}, {"clk", 5, 2, 2, 2}}},
        {"wide_vectors.txt", 1, 3, false, {3}, {{"clk", 2, 2, 1, 1}}},
        {"half_fail_26.txt", 13, 26, false, {1, 2, 4}, {{"clk", 3, 6, 4, 4}, {"clk", 5, 6, 4, 4}}},
        {"no_tests_no_mismatches.txt", 0, 1, true, {}, {}},
        {"decimal_values.txt", 1, 2, false, {1}, {{"index", 2, 2, 1, 1}}},
        {"passed_after_summary.txt", 1, 3, false, {2, 3}, {{"clk", 1, 1, 1, 1}}},
    };
    return table;
}

// Checks one parsed report against its expectation; returns a description of
// the first divergence, or empty when everything matches.
inline std::string check(const Expected& e, const veriloop::SimReport& r) {
    auto fail = [&](const std::string& what) { return e.file + ": " + what; };
    if (r.mismatch_count != e.mismatch_count)
        return fail("mismatch_count " + std::to_string(r.mismatch_count) + " != " +
                    std::to_string(e.mismatch_count));
    if (r.total_tests != e.total_tests)
        return fail("total_tests " + std::to_string(r.total_tests) + " != " +
                    std::to_string(e.total_tests));
    if (r.all_passed != e.all_passed) return fail("all_passed flag wrong");
    if (r.passed_tests != e.passed_tests) return fail("passed test ids differ");
    if (r.mismatches.size() != e.mismatches.size())
        return fail("parsed " + std::to_string(r.mismatches.size()) + " mismatch records, expected " +
                    std::to_string(e.mismatches.size()));
    for (size_t i = 0; i < e.mismatches.size(); i++) {
        const auto& want = e.mismatches[i];
        const auto& got = r.mismatches[i];
        if (got.position_kind != want.kind || got.position != want.position ||
            got.inputs.size() != want.inputs || got.generated.size() != want.generated ||
            got.reference.size() != want.reference)
            return fail("mismatch record " + std::to_string(i) + " differs");
    }
    return {};
}

} // namespace golden
