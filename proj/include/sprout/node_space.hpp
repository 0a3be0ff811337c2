#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sprout/engine.hpp"
#include "sprout/llm.hpp"
#include "sprout/project.hpp"
#include "sprout/prompts.hpp"

namespace sprout::node_space {

using Point2 = std::array<double, 2>;

/// Reduces embedding vectors to 2D. Must be deterministic for a given seed.
class Projector {
public:
    virtual ~Projector() = default;
    virtual std::vector<Point2> project(const std::vector<std::vector<double>>& vectors, std::uint64_t seed) const = 0;
    virtual std::string name() const = 0;
};

/// Top two principal components via the Gram matrix. Component signs are
/// fixed so the entry with the largest magnitude is positive.
class PcaProjector final : public Projector {
public:
    std::vector<Point2> project(const std::vector<std::vector<double>>& vectors, std::uint64_t seed) const override;
    std::string name() const override { return "pca"; }
};

/// Exact t-SNE with a seeded initialization. Falls back to PCA below
/// kMinPoints points.
class TsneProjector final : public Projector {
public:
    static constexpr std::size_t kMinPoints = 5;

    struct Options {
        double perplexity = 30.0;
        int iterations = 750;
        double learning_rate = 100.0;
    };

    TsneProjector() = default;
    explicit TsneProjector(Options options) : options_(options) {}

    std::vector<Point2> project(const std::vector<std::vector<double>>& vectors, std::uint64_t seed) const override;
    std::string name() const override { return "tsne"; }

private:
    Options options_;
};

/// "pca" or "tsne"; anything else is InvalidArgument.
std::unique_ptr<Projector> make_projector(const std::string& name);

/// Projector named by the project's `node_space.projector` config, default t-SNE.
std::unique_ptr<Projector> projector_for(const Project& project);

struct NodePoint {
    NodeId node_id;
    std::vector<double> vector;
    Point2 position{0.0, 0.0};
    IntentKey intent;
    NodeOrigin origin = NodeOrigin::Agent;
    bool on_active_chain = false;
};

struct Layout {
    std::vector<NodePoint> points;  // creation order
    bool stale = false;
};

/// Embeds every non-root paragraph (cached in project.embeddings by content
/// hash) and lays the vectors out in 2D. Identical vectors share a position.
/// When the gateway fails and `previous` is given, returns it flagged stale.
Layout refresh_points(Project& project, const llm::Gateway& gateway, const Projector& projector,
                      const Layout* previous = nullptr);

struct Alternative {
    NodeId id;
    NodeOrigin origin = NodeOrigin::Agent;
    // First ancestor-or-self of the alternative that is off the active chain.
    std::optional<NodeId> branch;
    bool on_active_chain = false;
};

/// Other non-root nodes sharing the node's intent, in creation order.
std::vector<Alternative> alternatives_for(const Project& project, const NodeId& node_id);

inline constexpr const char* kStylesKey = "refine.styles";
inline constexpr const char* kDefaultStyles = "formal,conversational,beginner-friendly,concise-technical";

std::vector<std::string> configured_styles(const Project& project);

struct RefineSpec {
    std::optional<std::string> style;
    std::optional<prompts::DetailDirection> detail;
    std::optional<std::string> custom_prompt;

    bool empty() const { return !style && !detail && !custom_prompt; }
};

/// The rewrite prompt for `spec`: the style, detail and free-prompt templates in
/// that order, joined when several are set.
std::string refine_prompt(const Project& project, const ThoughtNode& node, const RefineSpec& spec,
                          const prompts::PromptTemplateSet& templates);

/// Writes a refined sibling of the node. When the node is on the active chain
/// the chain is re-pointed through the new node.
NodeId refine_node(Project& project, const NodeId& node_id, const RefineSpec& spec, const engine::Engine& engine);

/// Swaps `alternative_id` into the active chain in place of `node_id`.
Chain adopt_alternative(Project& project, const NodeId& node_id, const NodeId& alternative_id);

}  // namespace sprout::node_space
