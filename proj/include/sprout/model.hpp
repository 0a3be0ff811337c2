#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sprout {

/// Opaque node identifier. Ids are handed out by a tree and never reused.
struct NodeId {
    std::string value;

    NodeId() = default;
    explicit NodeId(std::string v) : value(std::move(v)) {}

    bool empty() const noexcept { return value.empty(); }
    auto operator<=>(const NodeId&) const = default;
};

/// Immutable source text plus its line table. Lines are 1-based.
class SourceDocument {
public:
    SourceDocument() : SourceDocument("", "") {}
    SourceDocument(std::string language_tag, std::string text);

    const std::string& language_tag() const noexcept { return language_; }
    const std::string& text() const noexcept { return text_; }
    int line_count() const noexcept { return static_cast<int>(line_starts_.size()); }

    /// Line text without its terminating newline.
    std::string_view line(int line_number) const;

    /// Byte offset of the first character of `line_number`.
    std::size_t line_offset(int line_number) const;

    /// 1-based line containing byte `offset`.
    int line_at_offset(std::size_t offset) const;

    bool operator==(const SourceDocument& other) const {
        return language_ == other.language_ && text_ == other.text_;
    }

private:
    std::string language_;
    std::string text_;
    std::vector<std::size_t> line_starts_;
};

/// Inclusive, 1-based line range.
struct CodeRange {
    int start_line = 1;
    int end_line = 1;

    bool valid_in(const SourceDocument& source) const noexcept {
        return start_line >= 1 && start_line <= end_line && end_line <= source.line_count();
    }
    auto operator<=>(const CodeRange&) const = default;
};

/// Source lines of `range` joined by '\n', byte-exact (indentation kept).
std::string slice_lines(const SourceDocument& source, const CodeRange& range);

enum class ActionType {
    WriteTitle,
    WriteBackground,
    WriteCodeExplanation,
    WriteNotification,
    WriteSummary,
    Finish,
};

inline constexpr ActionType kWritableActions[] = {
    ActionType::WriteTitle,         ActionType::WriteBackground, ActionType::WriteCodeExplanation,
    ActionType::WriteNotification,  ActionType::WriteSummary,
};

std::string_view to_string(ActionType action);          // "WriteTitle"
std::string_view action_phrase(ActionType action);      // "write title"
std::optional<ActionType> parse_action(std::string_view text);  // accepts either form

struct Thought {
    ActionType action = ActionType::Finish;
    std::string rationale;
    std::optional<CodeRange> target;
    int votes = 0;

    bool operator==(const Thought&) const = default;
};

struct AgentStep {
    int step_index = 1;
    std::string observation;
    std::vector<Thought> thoughts;
    std::size_t chosen_index = 0;
    std::optional<NodeId> produced_node;

    bool operator==(const AgentStep&) const = default;
};

enum class AnchorStatus { Resolved, NoCode, ContentMismatch, Ambiguous };

std::string_view to_string(AnchorStatus status);
std::optional<AnchorStatus> parse_anchor_status(std::string_view text);

struct TextCodeAnchor {
    int step_number = 1;
    std::string quoted_code;
    std::optional<CodeRange> resolved;
    AnchorStatus status = AnchorStatus::NoCode;
    std::string explanation;
    std::string summary;
    // Set alongside Resolved when several source locations matched the quote.
    bool ambiguous = false;

    bool operator==(const TextCodeAnchor&) const = default;
};

enum class NodeOrigin { Agent, UserDefined, Group, Split, Refine };

std::string_view to_string(NodeOrigin origin);
std::optional<NodeOrigin> parse_origin(std::string_view text);

struct ThoughtNode {
    NodeId id;
    std::uint64_t serial = 0;  // creation order within the tree
    std::optional<NodeId> parent;
    ActionType action = ActionType::Finish;  // the root sentinel carries Finish
    std::string paragraph;
    std::string brief;
    std::optional<TextCodeAnchor> anchor;
    int incoming_votes = 0;
    std::string incoming_reason;
    NodeOrigin origin = NodeOrigin::Agent;
    bool needs_review = false;

    bool operator==(const ThoughtNode&) const = default;
};

/// An unchosen thought kept under the node it was proposed from, so it can be
/// expanded later from the branch view.
struct ThoughtStub {
    NodeId id;
    std::uint64_t serial = 0;
    NodeId parent;
    Thought thought;

    bool operator==(const ThoughtStub&) const = default;
};

struct ThoughtTree {
    NodeId root;
    std::map<NodeId, ThoughtNode> nodes;
    std::vector<ThoughtStub> stubs;
    std::uint64_t next_serial = 0;

    /// A tree holding only the root sentinel.
    static ThoughtTree make();

    bool contains(const NodeId& id) const { return nodes.count(id) != 0; }
    const ThoughtNode& node(const NodeId& id) const;  // throws NotFound
    const ThoughtStub* find_stub(const NodeId& id) const;

    /// Children of `id` in creation order.
    std::vector<NodeId> children(const NodeId& id) const;
    std::vector<const ThoughtStub*> stubs_of(const NodeId& id) const;

    NodeId allocate_node_id();
    NodeId allocate_stub_id();

    bool operator==(const ThoughtTree&) const = default;
};

struct Chain {
    std::vector<NodeId> node_ids;

    std::size_t size() const noexcept { return node_ids.size(); }
    const NodeId& tail() const { return node_ids.back(); }
    bool contains(const NodeId& id) const;

    bool operator==(const Chain&) const = default;
};

struct TutorialBlock {
    NodeId node_id;
    ActionType action = ActionType::WriteBackground;
    std::string paragraph;
    std::string brief;
    std::optional<TextCodeAnchor> anchor;
};

using TutorialDocument = std::vector<TutorialBlock>;

struct IntentKey {
    ActionType action = ActionType::Finish;
    std::optional<CodeRange> target;

    bool operator==(const IntentKey&) const = default;
};

/// One entry per violated invariant, e.g. "missing-parent: n7". Empty when valid.
std::vector<std::string> validate_tree(const ThoughtTree& tree);

/// Root-to-node path. Throws NotFound for unknown ids.
Chain path_to(const ThoughtTree& tree, const NodeId& node);

/// Throws InvalidArgument for the root sentinel.
IntentKey intent_key(const ThoughtNode& node);

bool chain_valid(const ThoughtTree& tree, const Chain& chain);

/// Every node reachable from `id` including itself, in breadth-first order.
std::vector<NodeId> subtree_of(const ThoughtTree& tree, const NodeId& id);

TutorialDocument derive_tutorial(const ThoughtTree& tree, const Chain& chain);

}  // namespace sprout

template <>
struct std::hash<sprout::NodeId> {
    std::size_t operator()(const sprout::NodeId& id) const noexcept {
        return std::hash<std::string>{}(id.value);
    }
};
