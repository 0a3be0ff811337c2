#include <gtest/gtest.h>

#include "sprout/error.hpp"
#include "sprout/serialize.hpp"
#include "sprout/tree_ops.hpp"
#include "support.hpp"

using namespace sprout;
using namespace sprout::tree_ops;
using sprout::testing::ids;
using sprout::testing::make_paragraph;
using sprout::testing::ScriptBuilder;

namespace {

// title, code 2-4, code 5-7, summary as n1..n4 on the active chain.
Project sample() {
    Project p = Project::create("p", sprout::testing::numbered_source(10), 3);
    sprout::testing::append_chain(p, {make_paragraph(ActionType::WriteTitle, "Title"),
                                      make_paragraph(ActionType::WriteCodeExplanation, "first part", CodeRange{2, 4}, &p.source),
                                      make_paragraph(ActionType::WriteCodeExplanation, "second part", CodeRange{5, 7}, &p.source),
                                      make_paragraph(ActionType::WriteSummary, "Summary")});
    return p;
}

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

std::string dump_nodes(const Project& p, const std::vector<NodeId>& which) {
    std::string out;
    for (const auto& id : which) out += nlohmann::json(p.tree.node(id)).dump() + "\n";
    return out;
}

llm::MockGateway group_gateway() {
    return ScriptBuilder()
        .on({"in one paragraph"},
            sprout::testing::write_answer(2, "{{target_code}}", "Both parts together.", "Lines two to seven"))
        .gateway();
}

llm::MockGateway split_gateway() {
    return ScriptBuilder()
        .on({"in the next multiple steps"},
            sprout::testing::write_answer(2, "line_2 = 14\nline_3 = 21", "The first two lines.", "Head") + "\n" +
                sprout::testing::write_answer(3, "line_4 = 28", "The last line.", "Tail"))
        .on({"Action: write background"}, sprout::testing::write_answer(5, "", "Some background.", "Background"))
        .otherwise("One paragraph only, no labels.")
        .gateway();
}

}  // namespace

TEST(Group, MergesAdjacentNodesOnNewBranch) {
    auto gw = group_gateway();
    engine::Engine engine(gw);
    Project p = sample();
    const auto old_branch = ids({"n1", "n2", "n3", "n4"});
    const std::string before = dump_nodes(p, old_branch);

    const auto fork = group_nodes(p, ids({"n3", "n2"}), engine);
    EXPECT_EQ(fork.fork_parent, NodeId("n1"));
    ASSERT_EQ(fork.new_nodes.size(), 1u);
    ASSERT_EQ(fork.copied_suffix.size(), 1u);

    const auto& merged = p.tree.node(fork.new_nodes[0]);
    EXPECT_EQ(merged.origin, NodeOrigin::Group);
    EXPECT_EQ(merged.action, ActionType::WriteCodeExplanation);
    EXPECT_EQ(merged.anchor->resolved, (CodeRange{2, 7}));
    EXPECT_FALSE(merged.needs_review);
    EXPECT_EQ(p.tree.node(fork.copied_suffix[0]).paragraph, "Summary");

    EXPECT_EQ(p.active_chain.node_ids,
              (std::vector<NodeId>{NodeId("n0"), NodeId("n1"), fork.new_nodes[0], fork.copied_suffix[0]}));
    EXPECT_EQ(dump_nodes(p, old_branch), before);
    EXPECT_TRUE(validate_tree(p.tree).empty());
}

TEST(Group, CoversGapsWithTheSpan) {
    // Ranges 2-3 and 6-7 group to 2-7; the lines between are part of the paragraph's code.
    auto gw = group_gateway();
    Project p = Project::create("p", sprout::testing::numbered_source(10), 3);
    sprout::testing::append_chain(p, {make_paragraph(ActionType::WriteCodeExplanation, "a", CodeRange{2, 3}, &p.source),
                                      make_paragraph(ActionType::WriteCodeExplanation, "b", CodeRange{6, 7}, &p.source)});
    const auto fork = group_nodes(p, ids({"n1", "n2"}), engine::Engine(gw));
    EXPECT_EQ(p.tree.node(fork.new_nodes[0]).anchor->resolved, (CodeRange{2, 7}));
    EXPECT_TRUE(fork.copied_suffix.empty());
}

TEST(Group, UnresolvedMemberFlagsReview) {
    auto gw = group_gateway();
    Project p = sample();
    sprout::testing::append_chain(p, {make_paragraph(ActionType::WriteCodeExplanation, "no code here")});
    const auto fork = group_nodes(p, ids({"n4", "n5"}), engine::Engine(gw));
    EXPECT_TRUE(p.tree.node(fork.new_nodes[0]).needs_review);
}

TEST(Group, Rejections) {
    auto gw = group_gateway();
    engine::Engine engine(gw);
    Project p = sample();
    const Project before = p;
    EXPECT_EQ(code_of([&] { group_nodes(p, ids({"n2", "n4"}), engine); }), ErrorCode::NonContiguousSelection);
    EXPECT_EQ(code_of([&] { group_nodes(p, ids({"n0", "n1"}), engine); }), ErrorCode::RootSelected);
    EXPECT_EQ(code_of([&] { group_nodes(p, ids({"n2"}), engine); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { group_nodes(p, ids({"n2", "n2"}), engine); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { group_nodes(p, ids({"n2", "n77"}), engine); }), ErrorCode::NotFound);

    // Siblings are never adjacent.
    const NodeId side = attach_node(p.tree, make_paragraph(ActionType::WriteBackground, "side"), NodeId("n1"));
    EXPECT_EQ(code_of([&] { group_nodes(p, {NodeId("n2"), side}, engine); }), ErrorCode::NonContiguousSelection);
    p.tree = before.tree;
    EXPECT_EQ(p, before);
}

TEST(Split, RewritesNodeAsSeveral) {
    auto gw = split_gateway();
    engine::Engine engine(gw);
    Project p = sample();
    const std::string before = dump_nodes(p, ids({"n1", "n2", "n3", "n4"}));
    const auto fork = split_node(p, NodeId("n2"), engine);
    ASSERT_EQ(fork.new_nodes.size(), 2u);
    EXPECT_EQ(fork.copied_suffix.size(), 2u);
    EXPECT_EQ(p.tree.node(fork.new_nodes[0]).anchor->resolved, (CodeRange{2, 3}));
    EXPECT_EQ(p.tree.node(fork.new_nodes[1]).anchor->resolved, (CodeRange{4, 4}));
    EXPECT_EQ(p.tree.node(fork.new_nodes[1]).parent, fork.new_nodes[0]);
    EXPECT_EQ(p.tree.node(fork.new_nodes[0]).origin, NodeOrigin::Split);
    EXPECT_EQ(p.active_chain.size(), 6u);
    EXPECT_EQ(dump_nodes(p, ids({"n1", "n2", "n3", "n4"})), before);
    EXPECT_TRUE(chain_valid(p.tree, p.active_chain));
}

TEST(Split, SingleParagraphAnswerChangesNothing) {
    auto gw = ScriptBuilder()
                  .on({"in the next multiple steps"}, sprout::testing::write_answer(2, "line_2 = 14", "Just one.", "One"))
                  .gateway();
    Project p = sample();
    const Project before = p;
    EXPECT_EQ(code_of([&] { split_node(p, NodeId("n2"), engine::Engine(gw)); }), ErrorCode::ModelReturnedSingleParagraph);
    EXPECT_EQ(p, before);
    EXPECT_EQ(code_of([&] { split_node(p, NodeId("n0"), engine::Engine(gw)); }), ErrorCode::RootSelected);
}

TEST(Trim, RemovesSubtreeAndShortensChain) {
    Project p = sample();
    add_stub(p.tree, NodeId("n3"), {ActionType::WriteNotification, "maybe", std::nullopt, 1});
    EXPECT_EQ(trim_node(p, NodeId("n3")), 2u);
    EXPECT_FALSE(p.tree.contains(NodeId("n3")));
    EXPECT_FALSE(p.tree.contains(NodeId("n4")));
    EXPECT_EQ(p.active_chain.node_ids, ids({"n0", "n1", "n2"}));
    EXPECT_TRUE(validate_tree(p.tree).empty());
    EXPECT_EQ(code_of([&] { trim_node(p, NodeId("n0")); }), ErrorCode::RootSelected);
    EXPECT_EQ(code_of([&] { trim_node(p, NodeId("n3")); }), ErrorCode::NotFound);

    // Off-chain trims leave the chain alone; ids are never handed out again.
    const NodeId side = attach_node(p.tree, make_paragraph(ActionType::WriteBackground, "side"), NodeId("n1"));
    trim_node(p, side);
    EXPECT_EQ(p.active_chain.node_ids, ids({"n0", "n1", "n2"}));
    const NodeId next = attach_node(p.tree, make_paragraph(ActionType::WriteBackground, "next"), NodeId("n1"));
    EXPECT_NE(next, side);
}

TEST(Assemble, SetsChainAndEmits) {
    Project p = sample();
    const NodeId side = attach_node(p.tree, make_paragraph(ActionType::WriteBackground, "side"), NodeId("n1"));
    std::vector<Event> events;
    assemble_quick(p, side, [&](const Event& e) { events.push_back(e); });
    EXPECT_EQ(p.active_chain.node_ids, (std::vector<NodeId>{NodeId("n0"), NodeId("n1"), side}));
    ASSERT_EQ(events.size(), 1u);
    EXPECT_EQ(events[0].kind, EventKind::ChainChanged);
    EXPECT_THROW(assemble_quick(p, NodeId("n99")), Error);
}

TEST(Choices, RankedByVotesThenCreation) {
    Project p = sample();
    auto a = make_paragraph(ActionType::WriteBackground, "a");
    a.incoming_votes = 1;
    const NodeId na = attach_node(p.tree, a, NodeId("n1"));  // n2 already has 0 votes
    const NodeId s1 = add_stub(p.tree, NodeId("n1"), {ActionType::WriteNotification, "s1", std::nullopt, 2});
    const NodeId s2 = add_stub(p.tree, NodeId("n1"), {ActionType::WriteSummary, "s2", std::nullopt, 1});

    const auto all = enumerate_choices(p, NodeId("n1"), 10);
    std::vector<NodeId> order;
    for (const auto& c : all) order.push_back(c.id);
    EXPECT_EQ(order, (std::vector<NodeId>{s1, na, s2, NodeId("n2")}));
    EXPECT_FALSE(all[0].expanded);
    EXPECT_EQ(all[0].reason, "s1");
    EXPECT_EQ(all[3].target, (CodeRange{2, 4}));
    EXPECT_EQ(enumerate_choices(p, NodeId("n1")).size(), 3u);
    EXPECT_TRUE(enumerate_choices(p, NodeId("n4")).empty());
    EXPECT_THROW(enumerate_choices(p, NodeId("n1"), 0), Error);
}

TEST(Extend, NavigatesChildOrExpandsStub) {
    auto gw = split_gateway();
    engine::Engine engine(gw);
    Project p = sample();
    // Navigating to an existing child.
    p.active_chain = path_to(p.tree, NodeId("n1"));
    EXPECT_EQ(extend_step(p, NodeId("n1"), NodeId("n2"), engine), NodeId("n2"));
    EXPECT_EQ(p.active_chain.node_ids, ids({"n0", "n1", "n2"}));

    const NodeId stub = add_stub(p.tree, NodeId("n2"), {ActionType::WriteBackground, "context", std::nullopt, 2});
    const NodeId made = extend_step(p, NodeId("n2"), stub, engine);
    EXPECT_EQ(p.tree.node(made).paragraph, "Some background.");
    EXPECT_EQ(p.tree.node(made).incoming_votes, 2);
    EXPECT_EQ(p.tree.find_stub(stub), nullptr);
    EXPECT_EQ(p.active_chain.tail(), made);

    const NodeId finish = add_stub(p.tree, NodeId("n3"), {ActionType::Finish, "done", std::nullopt, 0});
    EXPECT_EQ(extend_step(p, NodeId("n3"), finish, engine), NodeId("n3"));
    EXPECT_EQ(code_of([&] { extend_step(p, NodeId("n1"), NodeId("n3"), engine); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { extend_step(p, NodeId("n1"), NodeId("t99"), engine); }), ErrorCode::NotFound);
}

TEST(Extend, FailedWriteKeepsStub) {
    auto gw = ScriptBuilder().otherwise("unhelpful").gateway();
    Project p = sample();
    const NodeId stub = add_stub(p.tree, NodeId("n4"), {ActionType::WriteNotification, "note", std::nullopt, 0});
    const Project before = p;
    EXPECT_THROW(extend_step(p, NodeId("n4"), stub, engine::Engine(gw)), Error);
    EXPECT_EQ(p, before);
}

TEST(InheritedSuffix, ChainOrEarliestChild) {
    Project p = sample();
    EXPECT_EQ(inherited_suffix(p, NodeId("n2")), ids({"n3", "n4"}));
    p.active_chain = path_to(p.tree, NodeId("n1"));
    EXPECT_EQ(inherited_suffix(p, NodeId("n2")), ids({"n3", "n4"}));
    EXPECT_TRUE(inherited_suffix(p, NodeId("n4")).empty());
}

TEST(TreeOpsProperty, RandomSequencesKeepInvariants) {
    auto gw = split_gateway();
    engine::Engine engine(gw);
    sprout::testing::RandomProjects gen(2024);
    for (int round = 0; round < 40; ++round) {
        Project p = gen.project(gen.uniform(3, 12));
        for (int op = 0; op < 25; ++op) {
            std::vector<NodeId> nodes;
            for (const auto& [id, _] : p.tree.nodes) nodes.push_back(id);
            const NodeId pick = nodes[gen.uniform(0, static_cast<int>(nodes.size()) - 1)];
            try {
                switch (gen.uniform(0, 2)) {
                    case 0: trim_node(p, pick); break;
                    case 1: assemble_quick(p, pick); break;
                    default: {
                        auto choices = enumerate_choices(p, pick, 5);
                        if (!choices.empty()) extend_step(p, pick, choices[0].id, engine);
                    }
                }
            } catch (const Error&) {
                // Root trims and failed writes are expected; the invariants must still hold.
            }
            ASSERT_TRUE(validate_tree(p.tree).empty());
            ASSERT_TRUE(chain_valid(p.tree, p.active_chain));
        }
    }
}
