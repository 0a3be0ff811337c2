#include "sprout/model.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <set>
#include <unordered_map>

#include "sprout/error.hpp"

namespace sprout {

SourceDocument::SourceDocument(std::string language_tag, std::string text)
    : language_(std::move(language_tag)), text_(std::move(text)) {
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < text_.size(); ++i) {
        if (text_[i] == '\n' && i + 1 < text_.size()) {
            line_starts_.push_back(i + 1);
        }
    }
}

std::string_view SourceDocument::line(int line_number) const {
    if (line_number < 1 || line_number > line_count()) {
        throw Error(ErrorCode::InvalidArgument, "line out of range", std::to_string(line_number));
    }
    const std::size_t begin = line_starts_[static_cast<std::size_t>(line_number - 1)];
    std::size_t end = text_.find('\n', begin);
    if (end == std::string::npos) end = text_.size();
    return std::string_view(text_).substr(begin, end - begin);
}

std::size_t SourceDocument::line_offset(int line_number) const {
    if (line_number < 1 || line_number > line_count()) {
        throw Error(ErrorCode::InvalidArgument, "line out of range", std::to_string(line_number));
    }
    return line_starts_[static_cast<std::size_t>(line_number - 1)];
}

int SourceDocument::line_at_offset(std::size_t offset) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    return static_cast<int>(it - line_starts_.begin());
}

std::string slice_lines(const SourceDocument& source, const CodeRange& range) {
    if (!range.valid_in(source)) {
        throw Error(ErrorCode::InvalidArgument, "range not valid in source",
                    std::to_string(range.start_line) + "-" + std::to_string(range.end_line));
    }
    std::string out;
    for (int line = range.start_line; line <= range.end_line; ++line) {
        if (line != range.start_line) out.push_back('\n');
        out.append(source.line(line));
    }
    return out;
}

namespace {

struct ActionName {
    ActionType action;
    std::string_view name;
    std::string_view phrase;
};

constexpr ActionName kActionNames[] = {
    {ActionType::WriteTitle, "WriteTitle", "write title"},
    {ActionType::WriteBackground, "WriteBackground", "write background"},
    {ActionType::WriteCodeExplanation, "WriteCodeExplanation", "write code explanation"},
    {ActionType::WriteNotification, "WriteNotification", "write notification"},
    {ActionType::WriteSummary, "WriteSummary", "write summary"},
    {ActionType::Finish, "Finish", "finish"},
};

std::string squash_lower(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(ActionType action) {
    for (const auto& entry : kActionNames) {
        if (entry.action == action) return entry.name;
    }
    return "Unknown";
}

std::string_view action_phrase(ActionType action) {
    for (const auto& entry : kActionNames) {
        if (entry.action == action) return entry.phrase;
    }
    return "unknown";
}

std::optional<ActionType> parse_action(std::string_view text) {
    const std::string key = squash_lower(text);
    for (const auto& entry : kActionNames) {
        if (key == squash_lower(entry.name)) return entry.action;
    }
    return std::nullopt;
}

std::string_view to_string(AnchorStatus status) {
    switch (status) {
        case AnchorStatus::Resolved: return "Resolved";
        case AnchorStatus::NoCode: return "NoCode";
        case AnchorStatus::ContentMismatch: return "ContentMismatch";
        case AnchorStatus::Ambiguous: return "Ambiguous";
    }
    return "Unknown";
}

std::optional<AnchorStatus> parse_anchor_status(std::string_view text) {
    for (auto s : {AnchorStatus::Resolved, AnchorStatus::NoCode, AnchorStatus::ContentMismatch,
                   AnchorStatus::Ambiguous}) {
        if (text == to_string(s)) return s;
    }
    return std::nullopt;
}

std::string_view to_string(NodeOrigin origin) {
    switch (origin) {
        case NodeOrigin::Agent: return "Agent";
        case NodeOrigin::UserDefined: return "UserDefined";
        case NodeOrigin::Group: return "Group";
        case NodeOrigin::Split: return "Split";
        case NodeOrigin::Refine: return "Refine";
    }
    return "Unknown";
}

std::optional<NodeOrigin> parse_origin(std::string_view text) {
    for (auto o : {NodeOrigin::Agent, NodeOrigin::UserDefined, NodeOrigin::Group, NodeOrigin::Split,
                   NodeOrigin::Refine}) {
        if (text == to_string(o)) return o;
    }
    return std::nullopt;
}

ThoughtTree ThoughtTree::make() {
    ThoughtTree tree;
    ThoughtNode root;
    root.id = tree.allocate_node_id();
    root.serial = 0;
    root.action = ActionType::Finish;
    tree.root = root.id;
    tree.nodes.emplace(root.id, std::move(root));
    return tree;
}

const ThoughtNode& ThoughtTree::node(const NodeId& id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) {
        throw Error(ErrorCode::NotFound, "unknown node " + id.value, id.value);
    }
    return it->second;
}

const ThoughtStub* ThoughtTree::find_stub(const NodeId& id) const {
    for (const auto& stub : stubs) {
        if (stub.id == id) return &stub;
    }
    return nullptr;
}

std::vector<NodeId> ThoughtTree::children(const NodeId& id) const {
    std::vector<const ThoughtNode*> found;
    for (const auto& [_, node] : nodes) {
        if (node.parent && *node.parent == id) found.push_back(&node);
    }
    std::sort(found.begin(), found.end(),
              [](const ThoughtNode* a, const ThoughtNode* b) { return a->serial < b->serial; });
    std::vector<NodeId> out;
    out.reserve(found.size());
    for (const auto* node : found) out.push_back(node->id);
    return out;
}

std::vector<const ThoughtStub*> ThoughtTree::stubs_of(const NodeId& id) const {
    std::vector<const ThoughtStub*> out;
    for (const auto& stub : stubs) {
        if (stub.parent == id) out.push_back(&stub);
    }
    return out;
}

NodeId ThoughtTree::allocate_node_id() {
    return NodeId("n" + std::to_string(next_serial++));
}

NodeId ThoughtTree::allocate_stub_id() {
    return NodeId("t" + std::to_string(next_serial++));
}

bool Chain::contains(const NodeId& id) const {
    return std::find(node_ids.begin(), node_ids.end(), id) != node_ids.end();
}

std::vector<std::string> validate_tree(const ThoughtTree& tree) {
    std::vector<std::string> violations;
    auto report = [&](std::string_view kind, const NodeId& id) {
        violations.push_back(std::string(kind) + ": " + id.value);
    };

    const auto root_it = tree.nodes.find(tree.root);
    if (root_it == tree.nodes.end()) {
        report("missing-root", tree.root);
    } else if (root_it->second.parent) {
        report("root-has-parent", tree.root);
    }

    std::vector<const ThoughtNode*> ordered;
    for (const auto& [key, node] : tree.nodes) {
        if (key != node.id) report("id-mismatch", key);
        ordered.push_back(&node);
    }
    std::sort(ordered.begin(), ordered.end(), [](const ThoughtNode* a, const ThoughtNode* b) {
        return a->serial != b->serial ? a->serial < b->serial : a->id < b->id;
    });

    for (const ThoughtNode* node : ordered) {
        if (node->id == tree.root) continue;
        if (!node->parent) {
            report("extra-root", node->id);
        } else if (!tree.contains(*node->parent)) {
            report("missing-parent", node->id);
        }
        if (node->brief.empty()) report("empty-brief", node->id);
        const bool wants_anchor = node->action == ActionType::WriteCodeExplanation;
        if (wants_anchor != node->anchor.has_value()) {
            report("anchor-mismatch", node->id);
        } else if (node->anchor) {
            const auto& a = *node->anchor;
            const bool resolved = a.status == AnchorStatus::Resolved;
            if (resolved != a.resolved.has_value()) report("anchor-status", node->id);
        }
        if (node->action == ActionType::Finish) report("finish-node", node->id);
    }

    // Walk every parent chain once; a walk that re-enters its own path is a cycle.
    enum class Mark { Fresh, Active, Done };
    std::unordered_map<NodeId, Mark> marks;
    for (const ThoughtNode* start : ordered) {
        std::vector<NodeId> path;
        NodeId current = start->id;
        while (true) {
            auto& mark = marks[current];
            if (mark == Mark::Done) break;
            if (mark == Mark::Active) {
                auto first = std::find(path.begin(), path.end(), current);
                const ThoughtNode* smallest = nullptr;
                for (auto it = first; it != path.end(); ++it) {
                    const ThoughtNode& member = tree.nodes.at(*it);
                    if (!smallest || member.serial < smallest->serial ||
                        (member.serial == smallest->serial && member.id < smallest->id)) {
                        smallest = &member;
                    }
                }
                report("cycle", smallest->id);
                break;
            }
            mark = Mark::Active;
            path.push_back(current);
            const ThoughtNode& node = tree.nodes.at(current);
            if (!node.parent || !tree.contains(*node.parent)) break;
            current = *node.parent;
        }
        for (const auto& id : path) marks[id] = Mark::Done;
    }

    std::set<NodeId> seen;
    for (const auto& [key, _] : tree.nodes) seen.insert(key);
    for (const auto& stub : tree.stubs) {
        if (!seen.insert(stub.id).second) report("duplicate-id", stub.id);
        if (!tree.contains(stub.parent)) report("stub-missing-parent", stub.id);
        const bool wants_target = stub.thought.action == ActionType::WriteCodeExplanation;
        if (wants_target != stub.thought.target.has_value()) report("stub-target", stub.id);
    }
    return violations;
}

Chain path_to(const ThoughtTree& tree, const NodeId& node) {
    Chain chain;
    NodeId current = node;
    const ThoughtNode* n = &tree.node(current);
    chain.node_ids.push_back(current);
    while (n->parent) {
        if (chain.node_ids.size() > tree.nodes.size()) {
            throw Error(ErrorCode::InvalidArgument, "parent links contain a cycle", node.value);
        }
        current = *n->parent;
        n = &tree.node(current);
        chain.node_ids.push_back(current);
    }
    std::reverse(chain.node_ids.begin(), chain.node_ids.end());
    return chain;
}

IntentKey intent_key(const ThoughtNode& node) {
    if (!node.parent) {
        throw Error(ErrorCode::InvalidArgument, "the root sentinel has no intent", node.id.value);
    }
    IntentKey key;
    key.action = node.action;
    if (node.action == ActionType::WriteCodeExplanation && node.anchor &&
        node.anchor->status == AnchorStatus::Resolved) {
        key.target = node.anchor->resolved;
    }
    return key;
}

bool chain_valid(const ThoughtTree& tree, const Chain& chain) {
    if (chain.node_ids.empty() || chain.node_ids.front() != tree.root) return false;
    for (const auto& id : chain.node_ids) {
        if (!tree.contains(id)) return false;
    }
    for (std::size_t i = 1; i < chain.node_ids.size(); ++i) {
        const auto& parent = tree.nodes.at(chain.node_ids[i]).parent;
        if (!parent || *parent != chain.node_ids[i - 1]) return false;
    }
    return true;
}

std::vector<NodeId> subtree_of(const ThoughtTree& tree, const NodeId& id) {
    tree.node(id);
    std::vector<NodeId> out;
    std::deque<NodeId> queue{id};
    while (!queue.empty()) {
        NodeId current = queue.front();
        queue.pop_front();
        out.push_back(current);
        for (auto& child : tree.children(current)) queue.push_back(std::move(child));
    }
    return out;
}

TutorialDocument derive_tutorial(const ThoughtTree& tree, const Chain& chain) {
    TutorialDocument doc;
    for (std::size_t i = 1; i < chain.node_ids.size(); ++i) {
        const ThoughtNode& node = tree.node(chain.node_ids[i]);
        doc.push_back({node.id, node.action, node.paragraph, node.brief, node.anchor});
    }
    return doc;
}

}  // namespace sprout
