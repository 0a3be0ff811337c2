#include <gtest/gtest.h>

#include <filesystem>

#include "sprout/engine.hpp"
#include "sprout/error.hpp"
#include "sprout/serialize.hpp"
#include "sprout/store.hpp"
#include "support.hpp"

using namespace sprout;
using sprout::testing::make_paragraph;

namespace fs = std::filesystem;

namespace {

std::string schema_detail(const std::string& text) {
    try {
        store::from_text(text);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemaError) << e.what();
        return e.detail();
    }
    return "accepted";
}

nlohmann::json sample_json() {
    Project p = Project::create("p", sprout::testing::numbered_source(6), 9);
    sprout::testing::append_chain(p, {make_paragraph(ActionType::WriteTitle, "T"),
                                      make_paragraph(ActionType::WriteCodeExplanation, "c", CodeRange{2, 3}, &p.source)});
    return nlohmann::json::parse(store::to_text(p));
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "sprout_store_test";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Store, RandomProjectsRoundTrip) {
    sprout::testing::RandomProjects gen(99);
    for (int i = 0; i < 100; ++i) {
        const Project p = gen.project(gen.uniform(0, 30));
        const std::string text = store::to_text(p);
        const Project back = store::from_text(text);
        ASSERT_EQ(back, p) << text;
        ASSERT_EQ(store::to_text(back), text);
    }
}

TEST(Store, CanonicalText) {
    const std::string text = store::to_text(Project::create("p", SourceDocument("python", "x = 1\n"), 1));
    EXPECT_EQ(text.back(), '\n');
    EXPECT_EQ(text.rfind("{\n  \"active_chain\"", 0), 0u);  // sorted keys, two-space indent
    EXPECT_NE(text.find("\"language_tag\": \"python\""), std::string::npos);
}

TEST(Store, SaveAndLoad) {
    sprout::testing::RandomProjects gen(5);
    const Project p = gen.project(12);
    const auto path = scratch("p.json");
    store::save(p, path.string());
    EXPECT_EQ(store::load(path.string()), p);
    EXPECT_EQ(sprout::testing::read_text(path.string()), store::to_text(p));
}

TEST(Store, IoErrors) {
    const Project p = Project::create("p", SourceDocument("text", ""), 1);
    try {
        store::save(p, "/nonexistent-dir/for/sure/p.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
    try {
        store::load(scratch("missing.json").string());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
}

TEST(Store, SchemaErrorsNameTheField) {
    auto j = sample_json();
    j["schema_version"] = 99;
    EXPECT_EQ(schema_detail(j.dump()), "/schema_version");

    EXPECT_EQ(schema_detail("{not json"), "");
    EXPECT_EQ(schema_detail("[]"), "");

    j = sample_json();
    j.erase("seed");
    EXPECT_EQ(schema_detail(j.dump()), "/seed");

    j = sample_json();
    j["config"]["x"] = 3;
    EXPECT_EQ(schema_detail(j.dump()), "/config/x");

    j = sample_json();
    j["active_chain"] = {"n0", "n2"};
    EXPECT_EQ(schema_detail(j.dump()), "/active_chain");

    j = sample_json();
    j["source"]["text"] = "only one line";  // the anchor at 2-3 no longer fits
    EXPECT_EQ(schema_detail(j.dump()), "/tree");

    j = sample_json();
    j["embeddings"]["abc"] = {1, "two"};
    EXPECT_EQ(schema_detail(j.dump()), "/embeddings/abc");

    EXPECT_EQ(schema_detail(sample_json().dump()), "accepted");
}

TEST(Store, MarkdownExport) {
    llm::MockGateway gw(llm::MockScript::load(sprout::testing::repo_path("fixtures/script.json")));
    Project p = Project::create(
        "two-sum", SourceDocument("python", sprout::testing::read_text(sprout::testing::repo_path("fixtures/two_sum.py"))), 7);
    engine::Engine(gw).run_autopilot(p, {}, {});
    const std::string md = store::export_markdown(p);
    EXPECT_EQ(md.rfind("# Two Sum with a Hash Map\n\n## Problem statement", 0), 0u);
    const std::string block = "<!-- lines 3-8 -->\n```python\n" + slice_lines(p.source, {3, 8}) + "\n```\n\n";
    EXPECT_NE(md.find(block), std::string::npos);
    EXPECT_NE(md.find("    seen = {}\n"), std::string::npos);  // indentation kept
    EXPECT_EQ(md.back(), '\n');
}

TEST(Store, MarkdownWithoutTitle) {
    Project p = Project::create("p", SourceDocument("c", "int x = 1;\n"), 1);
    sprout::testing::append_chain(p, {make_paragraph(ActionType::WriteCodeExplanation, "Declares x.", CodeRange{1, 1}, &p.source)});
    EXPECT_EQ(store::export_markdown(p),
              "# Untitled Tutorial\n\n## Declares x.\n\n<!-- lines 1-1 -->\n```c\nint x = 1;\n```\n\nDeclares x.\n");
}
