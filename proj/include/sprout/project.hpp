#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sprout/model.hpp"

namespace sprout {

inline constexpr int kSchemaVersion = 1;

struct Project {
    std::string id;
    SourceDocument source;
    ThoughtTree tree = ThoughtTree::make();
    Chain active_chain{{tree.root}};
    std::vector<AgentStep> steps;
    std::int64_t seed = 0;
    std::map<std::string, std::string> config;
    // Paragraph embeddings keyed by content hash.
    std::map<std::string, std::vector<double>> embeddings;
    int schema_version = kSchemaVersion;

    static Project create(std::string id, SourceDocument source, std::int64_t seed = 0);

    bool operator==(const Project&) const = default;
};

/// Deterministic project id for a seed and source, e.g. "p-3f2a9c0d11e4b7a2".
std::string derive_project_id(std::int64_t seed, const SourceDocument& source);

/// 64-bit FNV-1a as 16 hex digits.
std::string content_hash(std::string_view text);

// Tree mutation primitives. Ids are allocated from the tree and never reused.

/// Inserts `node` under `parent`, assigning a fresh id and serial.
NodeId attach_node(ThoughtTree& tree, ThoughtNode node, const NodeId& parent);

NodeId add_stub(ThoughtTree& tree, const NodeId& parent, Thought thought);

/// Removes `id`, its descendants and their stubs. Returns the number of nodes removed.
std::size_t remove_subtree(ThoughtTree& tree, const NodeId& id);

/// Copies `originals` (a parent-linked run) as a fresh linear chain beneath
/// `new_parent`. Returns the new ids in order.
std::vector<NodeId> copy_run(ThoughtTree& tree, const std::vector<NodeId>& originals, const NodeId& new_parent);

/// Chain entries strictly after `id`; empty if `id` is the tail or absent.
std::vector<NodeId> chain_suffix_after(const Chain& chain, const NodeId& id);

/// Resolved range of the nearest anchored node on the chain, searching from the tail.
std::optional<CodeRange> last_resolved_range(const ThoughtTree& tree, const Chain& chain);

bool chain_has_action(const ThoughtTree& tree, const Chain& chain, ActionType action);

}  // namespace sprout
