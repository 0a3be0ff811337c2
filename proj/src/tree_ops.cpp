#include "sprout/tree_ops.hpp"

#include <algorithm>
#include <set>

#include "sprout/anchor.hpp"
#include "sprout/error.hpp"
#include "sprout/prompts.hpp"
#include "sprout/serialize.hpp"

namespace sprout::tree_ops {

namespace {

const ThoughtNode& require_non_root(const Project& project, const NodeId& id) {
    const ThoughtNode& node = project.tree.node(id);  // NotFound
    if (id == project.tree.root) throw Error(ErrorCode::RootSelected, "the root cannot be selected", id.value);
    return node;
}

// Re-points the active chain: path to `parent`, then `fresh`, then copies of `suffix`.
std::vector<NodeId> fork_chain(Project& work, const NodeId& parent, const std::vector<NodeId>& fresh,
                               const std::vector<NodeId>& suffix) {
    const std::vector<NodeId> copies = copy_run(work.tree, suffix, fresh.back());
    Chain chain = path_to(work.tree, parent);
    chain.node_ids.insert(chain.node_ids.end(), fresh.begin(), fresh.end());
    chain.node_ids.insert(chain.node_ids.end(), copies.begin(), copies.end());
    work.active_chain = std::move(chain);
    return copies;
}

std::string joined_ids(const std::vector<NodeId>& ids) {
    std::string out;
    for (const auto& id : ids) out += (out.empty() ? "" : ", ") + id.value;
    return out;
}

}  // namespace

std::vector<NodeId> inherited_suffix(const Project& project, const NodeId& node_id) {
    if (project.active_chain.contains(node_id)) return chain_suffix_after(project.active_chain, node_id);
    std::vector<NodeId> suffix;
    NodeId at = node_id;
    for (auto kids = project.tree.children(at); !kids.empty(); kids = project.tree.children(at)) {
        at = kids.front();
        suffix.push_back(at);
    }
    return suffix;
}

std::string node_code(const Project& project, const ThoughtNode& node) {
    if (!node.anchor) return {};
    if (node.anchor->resolved) return slice_lines(project.source, *node.anchor->resolved);
    return node.anchor->quoted_code;
}

BranchFork group_nodes(Project& project, const std::vector<NodeId>& node_ids, const engine::Engine& engine) {
    if (node_ids.size() < 2) throw Error(ErrorCode::InvalidArgument, "group needs at least two nodes", "node_ids");
    for (const auto& id : node_ids) require_non_root(project, id);
    if (std::set<NodeId>(node_ids.begin(), node_ids.end()).size() != node_ids.size()) {
        throw Error(ErrorCode::InvalidArgument, "duplicate node in selection", "node_ids");
    }

    // The deepest selected node's path must contain the whole selection as one run.
    const NodeId* deepest = &node_ids.front();
    std::size_t depth = 0;
    for (const auto& id : node_ids) {
        const std::size_t d = path_to(project.tree, id).size();
        if (d > depth) {
            depth = d;
            deepest = &id;
        }
    }
    const Chain path = path_to(project.tree, *deepest);
    std::vector<std::size_t> positions;
    for (const auto& id : node_ids) {
        auto it = std::find(path.node_ids.begin(), path.node_ids.end(), id);
        if (it == path.node_ids.end()) {
            throw Error(ErrorCode::NonContiguousSelection, "selected nodes are not on one chain", id.value);
        }
        positions.push_back(static_cast<std::size_t>(it - path.node_ids.begin()));
    }
    std::sort(positions.begin(), positions.end());
    if (positions.back() - positions.front() + 1 != positions.size()) {
        throw Error(ErrorCode::NonContiguousSelection, "selected nodes are not adjacent", joined_ids(node_ids));
    }
    std::vector<NodeId> ordered;
    for (auto p : positions) ordered.push_back(path.node_ids[p]);
    const NodeId parent = *project.tree.node(ordered.front()).parent;

    // Merged intent: code explanation wins, else the first node's action.
    ActionType action = project.tree.node(ordered.front()).action;
    bool all_resolved = true;
    std::optional<CodeRange> span;
    std::string paragraphs;
    for (const auto& id : ordered) {
        const auto& node = project.tree.node(id);
        if (node.action == ActionType::WriteCodeExplanation) action = ActionType::WriteCodeExplanation;
        if (node.anchor) {
            if (node.anchor->status != AnchorStatus::Resolved || !node.anchor->resolved) {
                all_resolved = false;
            } else if (!span) {
                span = node.anchor->resolved;
            } else {
                span->start_line = std::min(span->start_line, node.anchor->resolved->start_line);
                span->end_line = std::max(span->end_line, node.anchor->resolved->end_line);
            }
        }
        if (!paragraphs.empty()) paragraphs += "\n\n";
        paragraphs += node.paragraph;
    }

    prompts::InterventionParams params;
    if (span) {
        params.code = slice_lines(project.source, *span);
    } else {
        for (const auto& id : ordered) {
            const std::string code = node_code(project, project.tree.node(id));
            if (!code.empty()) params.code += (params.code.empty() ? "" : "\n") + code;
        }
    }
    params.language = project.source.language_tag();
    params.paragraph = paragraphs;
    const Chain before = path_to(project.tree, parent);
    params.context = engine::render_context(project.source, project.tree, before);
    params.step = static_cast<int>(before.size());
    const std::string prompt = prompts::build_intervention_prompt(
        engine.templates(), prompts::InterventionKind::GroupOneParagraph, params);
    const std::string raw = engine.ask(prompt, engine.config().write_temperature,
                                       [](const std::string& r) { anchor::parse_write_response(r); });
    anchor::ParsedWriteResponse parsed = anchor::parse_write_response(raw);

    ThoughtNode merged = engine::make_node(action, parsed, project.source,
                                           last_resolved_range(project.tree, before), NodeOrigin::Group,
                                           static_cast<int>(before.size()));
    if (merged.anchor) {
        if (all_resolved && span) {
            merged.anchor->resolved = span;
            merged.anchor->status = AnchorStatus::Resolved;
            merged.anchor->ambiguous = false;
            if (merged.anchor->quoted_code.empty()) merged.anchor->quoted_code = slice_lines(project.source, *span);
        } else {
            merged.needs_review = true;
        }
    }
    merged.incoming_reason = "grouped " + joined_ids(ordered);

    Project work = project;
    const auto suffix = inherited_suffix(work, ordered.back());
    const NodeId merged_id = attach_node(work.tree, std::move(merged), parent);
    BranchFork fork;
    fork.fork_parent = parent;
    fork.new_nodes = {merged_id};
    fork.copied_suffix = fork_chain(work, parent, fork.new_nodes, suffix);
    project = std::move(work);
    return fork;
}

BranchFork split_node(Project& project, const NodeId& node_id, const engine::Engine& engine) {
    const ThoughtNode& original = require_non_root(project, node_id);
    const NodeId parent = *original.parent;
    const Chain before = path_to(project.tree, parent);

    prompts::InterventionParams params;
    params.code = node_code(project, original);
    params.language = project.source.language_tag();
    params.paragraph = original.paragraph;
    params.context = engine::render_context(project.source, project.tree, before);
    params.step = static_cast<int>(before.size());
    const std::string prompt =
        prompts::build_intervention_prompt(engine.templates(), prompts::InterventionKind::SplitMultiStep, params);

    auto parse_blocks = [](const std::string& raw) {
        std::vector<anchor::ParsedWriteResponse> parts;
        for (const auto& block : anchor::split_write_blocks(raw)) parts.push_back(anchor::parse_write_response(block));
        if (parts.size() < 2) {
            throw Error(ErrorCode::ModelReturnedSingleParagraph, "the model answered with a single paragraph",
                        std::to_string(parts.size()));
        }
        return parts;
    };
    const std::string raw = engine.ask(prompt, engine.config().write_temperature,
                                       [&](const std::string& r) { parse_blocks(r); });
    const auto parts = parse_blocks(raw);

    Project work = project;
    const auto suffix = inherited_suffix(work, node_id);
    std::optional<CodeRange> previous = last_resolved_range(work.tree, before);
    NodeId at = parent;
    BranchFork fork;
    fork.fork_parent = parent;
    int step = static_cast<int>(before.size());
    for (const auto& part : parts) {
        ThoughtNode node = engine::make_node(original.action, part, work.source, previous, NodeOrigin::Split, step++);
        if (node.anchor && node.anchor->resolved) previous = node.anchor->resolved;
        node.incoming_reason = "split from " + node_id.value;
        at = attach_node(work.tree, std::move(node), at);
        fork.new_nodes.push_back(at);
    }
    fork.copied_suffix = fork_chain(work, parent, fork.new_nodes, suffix);
    project = std::move(work);
    return fork;
}

std::size_t trim_node(Project& project, const NodeId& node_id) {
    const ThoughtNode& node = require_non_root(project, node_id);
    const NodeId parent = *node.parent;
    const bool on_chain = project.active_chain.contains(node_id);
    const std::size_t removed = remove_subtree(project.tree, node_id);
    if (on_chain) project.active_chain = path_to(project.tree, parent);
    return removed;
}

Chain assemble_quick(Project& project, const NodeId& node_id, const EventSink& events) {
    project.active_chain = path_to(project.tree, node_id);
    if (events) events(Event{EventKind::ChainChanged, engine::chain_payload(project.active_chain)});
    return project.active_chain;
}

std::vector<Choice> enumerate_choices(const Project& project, const NodeId& node_id, int top_k) {
    project.tree.node(node_id);  // NotFound
    if (top_k < 1) throw Error(ErrorCode::InvalidArgument, "top_k must be positive", "top_k");
    struct Ranked {
        Choice choice;
        std::uint64_t serial;
    };
    std::vector<Ranked> ranked;
    for (const auto& child : project.tree.children(node_id)) {
        const auto& node = project.tree.node(child);
        Choice c{child, true, node.action, std::nullopt, node.incoming_votes, node.incoming_reason};
        if (node.anchor) c.target = node.anchor->resolved;
        ranked.push_back({std::move(c), node.serial});
    }
    for (const auto* stub : project.tree.stubs_of(node_id)) {
        ranked.push_back({Choice{stub->id, false, stub->thought.action, stub->thought.target, stub->thought.votes,
                                 stub->thought.rationale},
                          stub->serial});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.choice.votes != b.choice.votes) return a.choice.votes > b.choice.votes;
        return a.serial < b.serial;
    });
    std::vector<Choice> out;
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(top_k); ++i) {
        out.push_back(std::move(ranked[i].choice));
    }
    return out;
}

NodeId extend_step(Project& project, const NodeId& node_id, const NodeId& choice, const engine::Engine& engine) {
    project.tree.node(node_id);  // NotFound
    if (project.tree.contains(choice)) {
        const auto& child = project.tree.node(choice);
        if (child.parent != node_id) {
            throw Error(ErrorCode::InvalidArgument, choice.value + " is not a child of " + node_id.value, choice.value);
        }
        project.active_chain = path_to(project.tree, choice);
        return choice;
    }
    const ThoughtStub* stub = project.tree.find_stub(choice);
    if (!stub) throw Error(ErrorCode::NotFound, "no node or stub " + choice.value, choice.value);
    if (stub->parent != node_id) {
        throw Error(ErrorCode::InvalidArgument, choice.value + " is not a choice of " + node_id.value, choice.value);
    }
    const Thought thought = stub->thought;
    const Chain base = path_to(project.tree, node_id);
    if (thought.action == ActionType::Finish) {
        // Nothing to write; finishing here just ends the chain at this node.
        project.active_chain = base;
        return node_id;
    }
    ThoughtNode node = engine.execute_action(project.source, base, project.tree, thought);  // stub kept on failure
    node.incoming_votes = thought.votes;
    node.incoming_reason = thought.rationale;

    const NodeId id = attach_node(project.tree, std::move(node), node_id);
    std::erase_if(project.tree.stubs, [&](const ThoughtStub& s) { return s.id == choice; });
    project.active_chain = base;
    project.active_chain.node_ids.push_back(id);
    return id;
}

}  // namespace sprout::tree_ops
