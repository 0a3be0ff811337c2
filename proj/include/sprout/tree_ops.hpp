#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sprout/engine.hpp"
#include "sprout/events.hpp"
#include "sprout/project.hpp"

// Structural edits of the thought tree. Every LLM-backed operation works on a
// copy of the project and commits only on success, so a failure leaves the
// project untouched.
namespace sprout::tree_ops {

struct BranchFork {
    NodeId fork_parent;
    std::vector<NodeId> new_nodes;
    std::vector<NodeId> copied_suffix;
};

/// Merges adjacent chain nodes into one paragraph on a new branch.
BranchFork group_nodes(Project& project, const std::vector<NodeId>& node_ids, const engine::Engine& engine);

/// Rewrites one node as several consecutive nodes on a new branch.
BranchFork split_node(Project& project, const NodeId& node_id, const engine::Engine& engine);

/// Removes the node and its subtree. Returns the number of nodes removed.
std::size_t trim_node(Project& project, const NodeId& node_id);

/// Makes the path to `node_id` the active chain and emits ChainChanged.
Chain assemble_quick(Project& project, const NodeId& node_id, const EventSink& events = {});

struct Choice {
    NodeId id;  // child node id, or stub id when `expanded` is false
    bool expanded = true;
    ActionType action = ActionType::Finish;
    std::optional<CodeRange> target;
    int votes = 0;
    std::string reason;
};

/// Children and unexpanded stubs of `node_id`, most voted first, ties in creation order.
std::vector<Choice> enumerate_choices(const Project& project, const NodeId& node_id, int top_k = 3);

/// Continues the chain from `node_id` with `choice`: a child is navigated to,
/// a stub is written into a real node first. Returns the new chain tail.
NodeId extend_step(Project& project, const NodeId& node_id, const NodeId& choice, const engine::Engine& engine);

/// Nodes below `node_id` that the new branch should inherit: the active chain's
/// suffix when the chain passes through the node, otherwise the earliest-child path.
std::vector<NodeId> inherited_suffix(const Project& project, const NodeId& node_id);

/// The best-known code for a node: its resolved slice, else its quoted code.
std::string node_code(const Project& project, const ThoughtNode& node);

}  // namespace sprout::tree_ops
