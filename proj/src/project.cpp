#include "sprout/project.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "sprout/error.hpp"

namespace sprout {

namespace {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 14695981039346656037ull) {
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string hex64(std::uint64_t value) {
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
    return buffer;
}

}  // namespace

Project Project::create(std::string id, SourceDocument source, std::int64_t seed) {
    Project project;
    project.id = std::move(id);
    project.source = std::move(source);
    project.seed = seed;
    return project;
}

std::string derive_project_id(std::int64_t seed, const SourceDocument& source) {
    std::uint64_t hash = fnv1a64(std::to_string(seed));
    hash = fnv1a64(source.language_tag(), hash);
    hash = fnv1a64(source.text(), hash);
    return "p-" + hex64(hash);
}

std::string content_hash(std::string_view text) { return hex64(fnv1a64(text)); }

NodeId attach_node(ThoughtTree& tree, ThoughtNode node, const NodeId& parent) {
    if (!tree.contains(parent)) {
        throw Error(ErrorCode::NotFound, "unknown parent " + parent.value, parent.value);
    }
    node.serial = tree.next_serial;
    node.id = tree.allocate_node_id();
    node.parent = parent;
    NodeId id = node.id;
    tree.nodes.emplace(id, std::move(node));
    return id;
}

NodeId add_stub(ThoughtTree& tree, const NodeId& parent, Thought thought) {
    if (!tree.contains(parent)) {
        throw Error(ErrorCode::NotFound, "unknown parent " + parent.value, parent.value);
    }
    ThoughtStub stub;
    stub.serial = tree.next_serial;
    stub.id = tree.allocate_stub_id();
    stub.parent = parent;
    stub.thought = std::move(thought);
    NodeId id = stub.id;
    tree.stubs.push_back(std::move(stub));
    return id;
}

std::size_t remove_subtree(ThoughtTree& tree, const NodeId& id) {
    const auto doomed_list = subtree_of(tree, id);
    const std::set<NodeId> doomed(doomed_list.begin(), doomed_list.end());
    for (const auto& victim : doomed) tree.nodes.erase(victim);
    std::erase_if(tree.stubs, [&](const ThoughtStub& s) { return doomed.count(s.parent) != 0; });
    return doomed.size();
}

std::vector<NodeId> copy_run(ThoughtTree& tree, const std::vector<NodeId>& originals, const NodeId& new_parent) {
    std::vector<NodeId> copies;
    NodeId parent = new_parent;
    for (const auto& original : originals) {
        ThoughtNode copy = tree.node(original);
        parent = attach_node(tree, std::move(copy), parent);
        copies.push_back(parent);
    }
    return copies;
}

std::vector<NodeId> chain_suffix_after(const Chain& chain, const NodeId& id) {
    auto it = std::find(chain.node_ids.begin(), chain.node_ids.end(), id);
    if (it == chain.node_ids.end()) return {};
    return {std::next(it), chain.node_ids.end()};
}

std::optional<CodeRange> last_resolved_range(const ThoughtTree& tree, const Chain& chain) {
    for (auto it = chain.node_ids.rbegin(); it != chain.node_ids.rend(); ++it) {
        const auto& node = tree.node(*it);
        if (node.anchor && node.anchor->resolved) return node.anchor->resolved;
    }
    return std::nullopt;
}

bool chain_has_action(const ThoughtTree& tree, const Chain& chain, ActionType action) {
    for (std::size_t i = 1; i < chain.node_ids.size(); ++i) {
        if (tree.node(chain.node_ids[i]).action == action) return true;
    }
    return false;
}

}  // namespace sprout
