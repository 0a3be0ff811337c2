#pragma once

// Shared helpers for the unit and acceptance tests: fixture paths, mock script
// building and random project generation.

#include <algorithm>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sprout/llm.hpp"
#include "sprout/model.hpp"
#include "sprout/project.hpp"

namespace sprout::testing {

inline std::string repo_path(const std::string& relative) { return std::string(SPROUT_REPO_DIR) + "/" + relative; }

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline std::vector<NodeId> ids(std::initializer_list<const char*> values) {
    std::vector<NodeId> out;
    for (const char* v : values) out.emplace_back(v);
    return out;
}

class ScriptBuilder {
public:
    ScriptBuilder& on(std::vector<std::string> patterns, std::string response) {
        script_.rules.push_back({std::move(patterns), std::move(response)});
        return *this;
    }
    ScriptBuilder& otherwise(std::string response) {
        script_.default_response = std::move(response);
        return *this;
    }
    llm::MockScript build() const { return script_; }
    llm::MockGateway gateway() const { return llm::MockGateway(script_); }

private:
    llm::MockScript script_;
};

inline std::string write_answer(int step, const std::string& code, const std::string& explanation,
                                const std::string& summary) {
    std::string out = "STEP: " + std::to_string(step) + "\nCODE:\n";
    if (!code.empty()) out += "```\n" + code + "\n```\n";
    return out + "EXPLANATION: " + explanation + "\nSUMMARY: " + summary;
}

// A detached node as the engine would produce it. Code explanations get an
// anchor resolved to `range` when given, NoCode otherwise.
inline ThoughtNode make_paragraph(ActionType action, const std::string& text,
                                  std::optional<CodeRange> range = std::nullopt, const SourceDocument* source = nullptr) {
    ThoughtNode node;
    node.action = action;
    node.paragraph = text;
    node.brief = text.substr(0, std::min<std::size_t>(text.size(), 24));
    if (node.brief.empty()) node.brief = "brief";
    if (action == ActionType::WriteCodeExplanation) {
        TextCodeAnchor anchor;
        anchor.explanation = text;
        anchor.summary = node.brief;
        if (range) {
            anchor.status = AnchorStatus::Resolved;
            anchor.resolved = range;
            anchor.quoted_code = source ? slice_lines(*source, *range) : "code";
        }
        node.anchor = anchor;
    }
    return node;
}

// Appends nodes one below the other, starting at the active chain tail, and
// extends the active chain through them.
inline std::vector<NodeId> append_chain(Project& project, const std::vector<ThoughtNode>& nodes) {
    std::vector<NodeId> ids;
    for (const auto& node : nodes) {
        const NodeId id = attach_node(project.tree, node, project.active_chain.tail());
        project.active_chain.node_ids.push_back(id);
        ids.push_back(id);
    }
    return ids;
}

inline SourceDocument numbered_source(int lines, const std::string& language = "python") {
    std::string text;
    for (int i = 1; i <= lines; ++i) text += "line_" + std::to_string(i) + " = " + std::to_string(i * 7) + "\n";
    return SourceDocument(language, text);
}

// Random but always valid projects, for persistence and property tests.
class RandomProjects {
public:
    explicit RandomProjects(std::uint64_t seed) : rng_(seed) {}

    std::string words(int lo, int hi) {
        static const char* kWords[] = {"tree", "node", "queue", "é", "中文", "\"quoted\"", "back\\slash",
                                       "tab\there", "line\nbreak", "sum", "loop", "index", "emoji 🌱", "{}", "<b>"};
        const int n = uniform(lo, hi);
        std::string out;
        for (int i = 0; i < n; ++i) {
            if (i) out += ' ';
            out += kWords[uniform(0, static_cast<int>(std::size(kWords)) - 1)];
        }
        return out;
    }

    SourceDocument source() {
        const int lines = uniform(1, 40);
        std::string text;
        for (int i = 0; i < lines; ++i) {
            text += std::string(uniform(0, 3) * 4, ' ') + "stmt_" + std::to_string(i) + "(" + words(0, 3) + ")";
            if (i + 1 < lines || coin()) text += "\n";
        }
        static const char* kLanguages[] = {"python", "cpp", "javascript", "text"};
        return SourceDocument(kLanguages[uniform(0, 3)], text);
    }

    CodeRange range_in(const SourceDocument& source) {
        const int a = uniform(1, source.line_count());
        const int b = uniform(a, source.line_count());
        return {a, b};
    }

    ThoughtNode node(const SourceDocument& source) {
        static const ActionType kActions[] = {ActionType::WriteTitle, ActionType::WriteBackground,
                                              ActionType::WriteCodeExplanation, ActionType::WriteNotification,
                                              ActionType::WriteSummary};
        ThoughtNode n;
        n.action = kActions[uniform(0, 4)];
        n.paragraph = words(0, 20);
        n.brief = "b " + words(1, 4);
        n.incoming_votes = uniform(0, 5);
        n.incoming_reason = words(0, 6);
        n.origin = static_cast<NodeOrigin>(uniform(0, 4));
        n.needs_review = uniform(0, 9) == 0;
        if (n.action == ActionType::WriteCodeExplanation) {
            TextCodeAnchor a;
            a.step_number = uniform(1, 30);
            a.explanation = n.paragraph;
            a.summary = n.brief;
            switch (uniform(0, 2)) {
                case 0:
                    a.status = AnchorStatus::Resolved;
                    a.resolved = range_in(source);
                    a.quoted_code = slice_lines(source, *a.resolved);
                    a.ambiguous = coin();
                    break;
                case 1:
                    a.status = AnchorStatus::NoCode;
                    break;
                default:
                    a.status = AnchorStatus::ContentMismatch;
                    a.quoted_code = words(1, 5);
            }
            n.anchor = a;
        }
        return n;
    }

    Thought thought(const SourceDocument& source) {
        Thought t;
        t.action = static_cast<ActionType>(uniform(0, 5));
        t.rationale = words(0, 8);
        t.votes = uniform(0, 3);
        if (t.action == ActionType::WriteCodeExplanation) t.target = range_in(source);
        return t;
    }

    Project project(int node_count) {
        SourceDocument src = source();
        Project p = Project::create("p-" + std::to_string(uniform(0, 1 << 30)), src,
                                    std::uniform_int_distribution<std::int64_t>()(rng_));
        std::vector<NodeId> ids{p.tree.root};
        for (int i = 0; i < node_count; ++i) {
            const NodeId parent = ids[uniform(0, static_cast<int>(ids.size()) - 1)];
            ids.push_back(attach_node(p.tree, node(src), parent));
            if (uniform(0, 3) == 0) add_stub(p.tree, ids[uniform(0, static_cast<int>(ids.size()) - 1)], thought(src));
        }
        p.active_chain = path_to(p.tree, ids[uniform(0, static_cast<int>(ids.size()) - 1)]);
        const int steps = uniform(0, 6);
        for (int i = 0; i < steps; ++i) {
            AgentStep step;
            step.step_index = i + 1;
            step.observation = words(0, 10);
            const int n = uniform(1, 4);
            for (int k = 0; k < n; ++k) step.thoughts.push_back(thought(src));
            step.chosen_index = static_cast<std::size_t>(uniform(0, n - 1));
            if (step.thoughts[step.chosen_index].action != ActionType::Finish) {
                step.produced_node = ids[uniform(0, static_cast<int>(ids.size()) - 1)];
            }
            p.steps.push_back(step);
        }
        if (coin()) p.config["refine.styles"] = "formal,pirate";
        if (coin()) p.config["note"] = words(1, 4);
        for (const auto& id : ids) {
            if (id == p.tree.root || !coin()) continue;
            std::vector<double> v(8);
            for (auto& x : v) x = std::uniform_real_distribution<double>(-1.0, 1.0)(rng_);
            p.embeddings[content_hash(p.tree.node(id).paragraph)] = v;
        }
        return p;
    }

    int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin() { return uniform(0, 1) == 1; }
    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace sprout::testing
