#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sprout/error.hpp"
#include "sprout/prompts.hpp"

using namespace sprout;
using namespace sprout::prompts;

namespace {

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST(Render, SubstitutesAndRejectsUnknown) {
    EXPECT_EQ(render("a {{x}} b {{x}}", {{"x", "1"}}), "a 1 b 1");
    EXPECT_EQ(render("no braces", {}), "no braces");
    try {
        render("{{missing}}", {{"x", "1"}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
        EXPECT_EQ(e.detail(), "missing");
    }
}

TEST(Render, ValuesAreNotRescanned) {
    EXPECT_EQ(render("{{a}}", {{"a", "{{b}}"}}), "{{b}}");
}

TEST(CodeBlock, FenceAndFallback) {
    EXPECT_EQ(code_block("x = 1", "python"), "\n```python\nx = 1\n```\n");
    EXPECT_EQ(code_block("  \n", "python"), " the content below ");
    // A longer fence when the code itself holds backticks.
    EXPECT_TRUE(contains(code_block("s = '```'", "python"), "````python"));
}

TEST(Intervention, SplitMultiStep) {
    InterventionParams p;
    p.code = "for i in range(3):\n    print(i)";
    p.language = "python";
    p.paragraph = "Loops and prints.";
    const auto prompt = build_intervention_prompt(InterventionKind::SplitMultiStep, p);
    EXPECT_TRUE(contains(prompt, "in the next multiple steps"));
    EXPECT_TRUE(contains(prompt, "```python\nfor i in range(3):\n    print(i)\n```"));
    EXPECT_TRUE(contains(prompt, "Loops and prints."));
}

TEST(Intervention, DetailRefine) {
    InterventionParams p;
    p.paragraph = "A long paragraph.";
    p.direction = DetailDirection::Shorter;
    const auto prompt = build_intervention_prompt(InterventionKind::DetailRefine, p);
    EXPECT_TRUE(contains(prompt, "Refine the last step"));
    EXPECT_TRUE(contains(prompt, "shorter"));
    EXPECT_TRUE(contains(prompt, " the content below "));
    p.direction = DetailDirection::Longer;
    EXPECT_TRUE(contains(build_intervention_prompt(InterventionKind::DetailRefine, p), "longer"));
}

TEST(Intervention, StyleAndFreeRefine) {
    InterventionParams p;
    p.paragraph = "Text.";
    p.style = "a pirate";
    EXPECT_TRUE(contains(build_intervention_prompt(InterventionKind::StyleRefine, p), "in the style of a pirate"));
    p.prompt = "use bullet points";
    EXPECT_TRUE(contains(build_intervention_prompt(InterventionKind::FreeRefine, p),
                         "Rewrite the paragraph below following this instruction: use bullet points"));
}

TEST(Intervention, GroupOneParagraph) {
    InterventionParams p;
    p.code = "a = 1\nb = 2";
    p.language = "text";
    const auto prompt = build_intervention_prompt(InterventionKind::GroupOneParagraph, p);
    EXPECT_TRUE(contains(prompt, "Explain\n```text\na = 1\nb = 2\n```\nin one paragraph"));
}

TEST(Intervention, MissingParameters) {
    auto detail_of = [](InterventionKind kind, const InterventionParams& p) {
        try {
            build_intervention_prompt(kind, p);
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
            return e.detail();
        }
        return std::string("none");
    };
    InterventionParams empty;
    EXPECT_EQ(detail_of(InterventionKind::StyleRefine, empty), "style");
    EXPECT_EQ(detail_of(InterventionKind::DetailRefine, empty), "direction");
    EXPECT_EQ(detail_of(InterventionKind::FreeRefine, empty), "prompt");
    EXPECT_EQ(detail_of(InterventionKind::UserDefinedGeneration, empty), "code");
    EXPECT_EQ(detail_of(InterventionKind::SplitMultiStep, empty), "code");
}

TEST(TemplateSet, DefaultsMatchShippedFiles) {
    const auto defaults = PromptTemplateSet::defaults();
    for (auto kind : {TemplateKind::System, TemplateKind::Plan, TemplateKind::Vote, TemplateKind::Write,
                      TemplateKind::UserDefinedGeneration, TemplateKind::SplitMultiStep,
                      TemplateKind::GroupOneParagraph, TemplateKind::StyleRefine, TemplateKind::DetailRefine,
                      TemplateKind::FreeRefine}) {
        std::ifstream in(std::string(SPROUT_REPO_DIR) + "/templates/" + std::string(file_name(kind)), std::ios::binary);
        std::stringstream buffer;
        buffer << in.rdbuf();
        EXPECT_EQ(defaults.get(kind), buffer.str()) << file_name(kind);
    }
}

TEST(TemplateSet, DirectoryOverrides) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "sprout_prompts_test";
    fs::create_directories(dir);
    std::ofstream(dir / "style_refine.txt") << "Be {{style}}: {{paragraph}}";
    const auto set = PromptTemplateSet::load_dir(dir.string());
    InterventionParams p;
    p.style = "brief";
    p.paragraph = "x";
    EXPECT_EQ(build_intervention_prompt(set, InterventionKind::StyleRefine, p), "Be brief: x");
    EXPECT_EQ(set.get(TemplateKind::Plan), PromptTemplateSet::defaults().get(TemplateKind::Plan));
    fs::remove_all(dir);

    try {
        PromptTemplateSet::load_dir((dir / "nope").string());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
}
