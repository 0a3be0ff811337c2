#include <gtest/gtest.h>

#include <random>

#include "sprout/anchor.hpp"
#include "sprout/error.hpp"

using namespace sprout;
using namespace sprout::anchor;

namespace {

ParsedWriteResponse quoting(const std::string& code) {
    ParsedWriteResponse p;
    p.quoted_code = code;
    p.explanation = "e";
    p.summary = "s";
    return p;
}

}  // namespace

TEST(ParseWriteResponse, AllFields) {
    const auto p = parse_write_response(
        "STEP: 3\nCODE:\n```python\nfor x in xs:\n    total += x\n```\nEXPLANATION: Adds them up.\nSUMMARY: Summing");
    EXPECT_EQ(p.step_number, 3);
    EXPECT_EQ(p.quoted_code, "for x in xs:\n    total += x");
    EXPECT_EQ(p.explanation, "Adds them up.");
    EXPECT_EQ(p.summary, "Summing");
}

TEST(ParseWriteResponse, MissingCodeIsEmpty) {
    const auto p = parse_write_response("STEP: 1\nEXPLANATION: Intro.\nSUMMARY: Intro");
    EXPECT_EQ(p.quoted_code, "");
}

TEST(ParseWriteResponse, MissingExplanation) {
    try {
        parse_write_response("STEP: 1\nCODE:\n```\nx\n```\nSUMMARY: s");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingField);
        EXPECT_EQ(e.detail(), "explanation");
    }
    try {
        parse_write_response("EXPLANATION: e");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.detail(), "summary");
    }
}

TEST(ParseWriteResponse, MultiLineExplanationAndLongSummary) {
    const auto p = parse_write_response(
        "EXPLANATION: first line\nsecond line\nSUMMARY: one two three four five six seven eight nine ten eleven twelve "
        "thirteen fourteen");
    EXPECT_EQ(p.explanation, "first line\nsecond line");
    EXPECT_EQ(p.summary, "one two three four five six seven eight nine ten eleven twelve");
}

TEST(ParseWriteResponse, ToleratesMarkdownLabels) {
    const auto p = parse_write_response("**STEP:** 2\n**CODE:**\n```\nx = 1\n```\n**EXPLANATION:** Sets x.\n**SUMMARY:** x");
    EXPECT_EQ(p.step_number, 2);
    EXPECT_EQ(p.quoted_code, "x = 1");
    EXPECT_EQ(p.explanation, "Sets x.");
}

TEST(SplitWriteBlocks, OneBlockPerStep) {
    const auto blocks = split_write_blocks(
        "Sure!\nSTEP: 1\nCODE:\n```\nSTEP: not a label\n```\nEXPLANATION: a\nSUMMARY: a\nSTEP: 2\nEXPLANATION: b\nSUMMARY: b");
    ASSERT_EQ(blocks.size(), 2u);
    EXPECT_NE(blocks[0].find("STEP: not a label"), std::string::npos);
    EXPECT_EQ(parse_write_response(blocks[1]).explanation, "b");
}

TEST(FindMatches, UniqueHit) {
    SourceDocument doc("t", "a\nb\nc");
    EXPECT_EQ(find_matches("b", doc), (std::vector<MatchCandidate>{{{2, 2}, Exactness::Exact}}));
}

TEST(FindMatches, IndentationLoss) {
    SourceDocument doc("t", "    x = 1");
    EXPECT_EQ(find_matches("x = 1", doc), (std::vector<MatchCandidate>{{{1, 1}, Exactness::Exact}}));
    SourceDocument two("t", "if a:\n    x  =  1\n");
    EXPECT_EQ(find_matches("if a:\nx = 1", two), (std::vector<MatchCandidate>{{{1, 2}, Exactness::WhitespaceNormalized}}));
}

TEST(FindMatches, NormalizedPassOnlyWhenExactFails) {
    SourceDocument doc("t", "    x = 1");
    // "x = 1" is an exact substring of the indented line, so the exact pass answers.
    EXPECT_EQ(find_matches("x = 1", doc)[0].exactness, Exactness::Exact);
    EXPECT_EQ(find_matches("x  = 1", doc)[0].exactness, Exactness::WhitespaceNormalized);
}

TEST(FindMatches, RepeatedLineMatchesBruteForce) {
    SourceDocument doc("t", "x\ny\nz\nx");
    // Brute force over every window: only (1,1) and (4,4) hold exactly "x".
    std::vector<MatchCandidate> expected;
    for (int a = 1; a <= doc.line_count(); ++a) {
        for (int b = a; b <= doc.line_count(); ++b) {
            if (slice_lines(doc, {a, b}) == "x") expected.push_back({{a, b}, Exactness::Exact});
        }
    }
    EXPECT_EQ(find_matches("x", doc), expected);
    EXPECT_EQ(expected.size(), 2u);
}

TEST(FindMatches, EmptyQuotedLinesIgnoredInNormalizedPass) {
    SourceDocument doc("t", "a = 1\nb = 2\n");
    EXPECT_EQ(find_matches("a  = 1\n\nb = 2", doc), (std::vector<MatchCandidate>{{{1, 2}, Exactness::WhitespaceNormalized}}));
}

TEST(FindMatches, RangesStayInBounds) {
    std::mt19937 rng(17);
    const char* kTokens[] = {"a", "b", " ", "  ", "x=1", "\t", "(", ")"};
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        const int lines = std::uniform_int_distribution<int>(1, 12)(rng);
        for (int i = 0; i < lines; ++i) {
            const int n = std::uniform_int_distribution<int>(0, 4)(rng);
            for (int k = 0; k < n; ++k) text += kTokens[std::uniform_int_distribution<int>(0, 7)(rng)];
            text += "\n";
        }
        SourceDocument doc("t", text);
        const std::size_t from = std::uniform_int_distribution<std::size_t>(0, text.size() - 1)(rng);
        const std::size_t len = std::uniform_int_distribution<std::size_t>(1, text.size() - from)(rng);
        const std::string quoted = text.substr(from, len);
        if (normalize_whitespace(quoted).empty()) continue;
        for (const auto& c : find_matches(quoted, doc)) EXPECT_TRUE(c.range.valid_in(doc)) << quoted;
    }
}

TEST(ResolveAnchor, Statuses) {
    SourceDocument doc("t", "x\ny\nz\nx");
    EXPECT_EQ(resolve_anchor(quoting(""), doc, std::nullopt).status, AnchorStatus::NoCode);
    EXPECT_EQ(resolve_anchor(quoting("  \n "), doc, std::nullopt).status, AnchorStatus::NoCode);
    const auto missing = resolve_anchor(quoting("w = 9"), doc, std::nullopt);
    EXPECT_EQ(missing.status, AnchorStatus::ContentMismatch);
    EXPECT_FALSE(missing.resolved);
    const auto y = resolve_anchor(quoting("y"), doc, std::nullopt);
    EXPECT_EQ(y.status, AnchorStatus::Resolved);
    EXPECT_EQ(y.resolved, (CodeRange{2, 2}));
    EXPECT_FALSE(y.ambiguous);
}

TEST(ResolveAnchor, ProximityBreaksAmbiguity) {
    SourceDocument doc("t", "x\ny\nz\nx");
    const auto near = resolve_anchor(quoting("x"), doc, CodeRange{3, 3});
    EXPECT_EQ(near.resolved, (CodeRange{4, 4}));  // |4-3| = 1 beats |1-3| = 2
    EXPECT_TRUE(near.ambiguous);
    EXPECT_EQ(resolve_anchor(quoting("x"), doc, std::nullopt).resolved, (CodeRange{1, 1}));
    // Equidistant candidates fall back to the earliest.
    SourceDocument sym("t", "x\nm\nx");
    EXPECT_EQ(resolve_anchor(quoting("x"), sym, CodeRange{2, 2}).resolved, (CodeRange{1, 1}));
}

TEST(ResolveAnchor, KeepsTextFields) {
    SourceDocument doc("t", "a\nb");
    ParsedWriteResponse p = quoting("b");
    p.step_number = 4;
    p.explanation = "explains b";
    p.summary = "b line";
    const auto a = resolve_anchor(p, doc, std::nullopt);
    EXPECT_EQ(a.step_number, 4);
    EXPECT_EQ(a.explanation, "explains b");
    EXPECT_EQ(a.summary, "b line");
    EXPECT_EQ(a.quoted_code, "b");
}

TEST(ResolveAnchor, PureFunction) {
    SourceDocument doc("t", "x\ny\nx");
    EXPECT_EQ(resolve_anchor(quoting("x"), doc, CodeRange{2, 2}), resolve_anchor(quoting("x"), doc, CodeRange{2, 2}));
}

TEST(ClassifyPrediction, Taxonomy) {
    TextCodeAnchor none;
    none.status = AnchorStatus::NoCode;
    EXPECT_EQ(classify_prediction(none, CodeRange{1, 3}), PredictionClass::NoCode);
    EXPECT_EQ(classify_prediction(none, std::nullopt), PredictionClass::Correct);

    TextCodeAnchor wide;
    wide.status = AnchorStatus::Resolved;
    wide.resolved = CodeRange{1, 10};
    EXPECT_EQ(classify_prediction(wide, CodeRange{2, 4}), PredictionClass::IncorrectCodeRange);
    EXPECT_EQ(classify_prediction(wide, std::nullopt), PredictionClass::IncorrectCodeRange);

    TextCodeAnchor exact = wide;
    exact.resolved = CodeRange{2, 4};
    EXPECT_EQ(classify_prediction(exact, CodeRange{2, 4}), PredictionClass::Correct);

    TextCodeAnchor fake;
    fake.status = AnchorStatus::ContentMismatch;
    EXPECT_EQ(classify_prediction(fake, CodeRange{2, 4}), PredictionClass::IncorrectCodeContent);
    EXPECT_EQ(classify_prediction(fake, std::nullopt), PredictionClass::IncorrectCodeContent);
}
