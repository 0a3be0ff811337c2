#include "sprout/node_space.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "sprout/anchor.hpp"
#include "sprout/error.hpp"
#include "sprout/tree_ops.hpp"

namespace sprout::node_space {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd to_matrix(const std::vector<std::vector<double>>& vectors) {
    const auto n = static_cast<Eigen::Index>(vectors.size());
    const auto d = static_cast<Eigen::Index>(vectors.front().size());
    MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(vectors[i].size()) != d) {
            throw Error(ErrorCode::InvalidArgument, "embedding dimensions differ", std::to_string(i));
        }
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = vectors[i][j];
    }
    return x;
}

std::vector<Point2> pca(const MatrixXd& x) {
    const auto n = x.rows();
    std::vector<Point2> out(static_cast<std::size_t>(n), Point2{0.0, 0.0});
    if (n < 2) return out;
    const MatrixXd centered = x.rowwise() - x.colwise().mean();
    const MatrixXd gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(gram);
    const VectorXd& values = solver.eigenvalues();  // ascending
    const double top = std::max(values(n - 1), 0.0);
    for (int axis = 0; axis < 2 && axis < n; ++axis) {
        const Eigen::Index k = n - 1 - axis;
        const double lambda = values(k);
        if (lambda <= 1e-12 * std::max(1.0, top)) continue;
        VectorXd u = solver.eigenvectors().col(k);
        Eigen::Index biggest = 0;
        u.cwiseAbs().maxCoeff(&biggest);
        if (u(biggest) < 0) u = -u;
        u *= std::sqrt(lambda);
        for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(axis)] = u(i);
    }
    return out;
}

// Row-conditional affinities with per-point bandwidths matched to the perplexity.
MatrixXd affinities(const MatrixXd& x, double perplexity) {
    const auto n = x.rows();
    MatrixXd d2(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) d2(i, j) = (x.row(i) - x.row(j)).squaredNorm();
    }
    const double target = std::log(perplexity);
    MatrixXd p = MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0;
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        VectorXd row(n);
        for (int iter = 0; iter < 64; ++iter) {
            double sum = 0.0;
            double weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                row(j) = j == i ? 0.0 : std::exp(-beta * d2(i, j));
                sum += row(j);
                weighted += row(j) * d2(i, j);
            }
            if (sum <= 0.0) {
                // Bandwidth far too narrow; widen it.
                hi = beta;
                beta = (lo + hi) / 2.0;
                continue;
            }
            const double entropy = std::log(sum) + beta * weighted / sum;
            row /= sum;
            const double diff = entropy - target;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (lo + hi) / 2.0;
            } else {
                hi = beta;
                beta = (lo + hi) / 2.0;
            }
        }
        p.row(i) = row.transpose();
    }
    MatrixXd joint = (p + p.transpose()) / (2.0 * static_cast<double>(n));
    return joint.cwiseMax(1e-12);
}

}  // namespace

std::vector<Point2> PcaProjector::project(const std::vector<std::vector<double>>& vectors, std::uint64_t) const {
    if (vectors.empty()) return {};
    return pca(to_matrix(vectors));
}

std::vector<Point2> TsneProjector::project(const std::vector<std::vector<double>>& vectors,
                                           std::uint64_t seed) const {
    if (vectors.size() < kMinPoints) return PcaProjector{}.project(vectors, seed);
    const MatrixXd x = to_matrix(vectors);
    const auto n = x.rows();
    const double perplexity = std::max(1.0, std::min(options_.perplexity, static_cast<double>(n - 1) / 3.0));
    const MatrixXd p = affinities(x, perplexity);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1e-4);
    MatrixXd y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i, 0) = normal(rng);
        y(i, 1) = normal(rng);
    }
    MatrixXd velocity = MatrixXd::Zero(n, 2);
    MatrixXd gains = MatrixXd::Ones(n, 2);
    MatrixXd num(n, n);
    MatrixXd grad(n, 2);

    const int exaggerate_until = std::min(100, options_.iterations / 4);
    for (int iter = 0; iter < options_.iterations; ++iter) {
        const double exaggeration = iter < exaggerate_until ? 12.0 : 1.0;
        const double momentum = iter < 250 ? 0.5 : 0.8;
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            num(i, i) = 0.0;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
                num(i, j) = num(j, i) = v;
                total += 2.0 * v;
            }
        }
        grad.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const double q = std::max(num(i, j) / total, 1e-12);
                const double w = (exaggeration * p(i, j) - q) * num(i, j);
                grad.row(i) += 4.0 * w * (y.row(i) - y.row(j));
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int c = 0; c < 2; ++c) {
                const bool same_sign = (grad(i, c) > 0) == (velocity(i, c) > 0);
                gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
                velocity(i, c) = momentum * velocity(i, c) - options_.learning_rate * gains(i, c) * grad(i, c);
            }
        }
        y += velocity;
        y = y.rowwise() - y.colwise().mean();
    }
    std::vector<Point2> out;
    for (Eigen::Index i = 0; i < n; ++i) out.push_back({y(i, 0), y(i, 1)});
    return out;
}

std::unique_ptr<Projector> make_projector(const std::string& name) {
    if (name == "pca") return std::make_unique<PcaProjector>();
    if (name == "tsne") return std::make_unique<TsneProjector>();
    throw Error(ErrorCode::InvalidArgument, "unknown projector " + name, name);
}

std::unique_ptr<Projector> projector_for(const Project& project) {
    auto it = project.config.find("node_space.projector");
    return make_projector(it == project.config.end() ? "tsne" : it->second);
}

Layout refresh_points(Project& project, const llm::Gateway& gateway, const Projector& projector,
                      const Layout* previous) {
    std::vector<const ThoughtNode*> nodes;
    for (const auto& [id, node] : project.tree.nodes) {
        if (id != project.tree.root) nodes.push_back(&node);
    }
    if (nodes.empty()) throw Error(ErrorCode::InvalidArgument, "the tree has no paragraphs", "tree");
    std::sort(nodes.begin(), nodes.end(), [](const auto* a, const auto* b) { return a->serial < b->serial; });

    auto text_of = [](const ThoughtNode& node) {
        if (!node.paragraph.empty()) return node.paragraph;
        return node.brief.empty() ? node.id.value : node.brief;
    };

    std::vector<std::string> missing;
    std::set<std::string> queued;
    for (const auto* node : nodes) {
        const std::string text = text_of(*node);
        const std::string key = content_hash(text);
        if (!project.embeddings.count(key) && queued.insert(key).second) missing.push_back(text);
    }
    if (!missing.empty()) {
        std::vector<llm::Embedding> vectors;
        try {
            vectors = gateway.embed(missing);
        } catch (const GatewayError&) {
            if (!previous) throw;
            Layout stale = *previous;
            stale.stale = true;
            return stale;
        }
        if (vectors.size() != missing.size()) {
            throw Error(ErrorCode::Transport, "embedding count does not match the request", "embed");
        }
        for (std::size_t i = 0; i < missing.size(); ++i) project.embeddings[content_hash(missing[i])] = vectors[i];
    }

    // Identical vectors are laid out once so they land on the same spot.
    std::map<std::vector<double>, std::size_t> unique_index;
    std::vector<std::vector<double>> unique;
    std::vector<std::size_t> slot;
    Layout layout;
    for (const auto* node : nodes) {
        const auto& vec = project.embeddings.at(content_hash(text_of(*node)));
        auto [it, fresh] = unique_index.emplace(vec, unique.size());
        if (fresh) unique.push_back(vec);
        slot.push_back(it->second);
        NodePoint point;
        point.node_id = node->id;
        point.vector = vec;
        point.intent = intent_key(*node);
        point.origin = node->origin;
        point.on_active_chain = project.active_chain.contains(node->id);
        layout.points.push_back(std::move(point));
    }
    const auto positions = projector.project(unique, static_cast<std::uint64_t>(project.seed));
    for (std::size_t i = 0; i < layout.points.size(); ++i) layout.points[i].position = positions[slot[i]];
    return layout;
}

std::vector<Alternative> alternatives_for(const Project& project, const NodeId& node_id) {
    const ThoughtNode& query = project.tree.node(node_id);
    if (node_id == project.tree.root) throw Error(ErrorCode::RootSelected, "the root has no alternatives", node_id.value);
    const IntentKey key = intent_key(query);
    std::vector<const ThoughtNode*> matches;
    for (const auto& [id, node] : project.tree.nodes) {
        if (id == project.tree.root || id == node_id) continue;
        if (intent_key(node) == key) matches.push_back(&node);
    }
    std::sort(matches.begin(), matches.end(), [](const auto* a, const auto* b) { return a->serial < b->serial; });
    std::vector<Alternative> out;
    for (const auto* node : matches) {
        Alternative alt;
        alt.id = node->id;
        alt.origin = node->origin;
        alt.on_active_chain = project.active_chain.contains(node->id);
        for (const auto& step : path_to(project.tree, node->id).node_ids) {
            if (!project.active_chain.contains(step)) {
                alt.branch = step;
                break;
            }
        }
        out.push_back(std::move(alt));
    }
    return out;
}

std::vector<std::string> configured_styles(const Project& project) {
    auto it = project.config.find(kStylesKey);
    const std::string list = it == project.config.end() ? kDefaultStyles : it->second;
    std::vector<std::string> styles;
    std::size_t start = 0;
    while (start <= list.size()) {
        auto comma = list.find(',', start);
        if (comma == std::string::npos) comma = list.size();
        std::string item = list.substr(start, comma - start);
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) styles.push_back(item);
        start = comma + 1;
    }
    return styles;
}

std::string refine_prompt(const Project& project, const ThoughtNode& node, const RefineSpec& spec,
                          const prompts::PromptTemplateSet& templates) {
    if (spec.empty()) throw Error(ErrorCode::InvalidArgument, "refinement needs a style, detail or prompt", "spec");
    prompts::InterventionParams params;
    params.code = tree_ops::node_code(project, node);
    params.language = project.source.language_tag();
    params.paragraph = node.paragraph;
    std::vector<std::string> parts;
    if (spec.style) {
        const auto styles = configured_styles(project);
        if (std::find(styles.begin(), styles.end(), *spec.style) == styles.end()) {
            throw Error(ErrorCode::InvalidArgument, "unknown style " + *spec.style, "style");
        }
        params.style = *spec.style;
        parts.push_back(prompts::build_intervention_prompt(templates, prompts::InterventionKind::StyleRefine, params));
    }
    if (spec.detail) {
        params.direction = spec.detail;
        parts.push_back(prompts::build_intervention_prompt(templates, prompts::InterventionKind::DetailRefine, params));
    }
    if (spec.custom_prompt) {
        params.prompt = *spec.custom_prompt;
        parts.push_back(prompts::build_intervention_prompt(templates, prompts::InterventionKind::FreeRefine, params));
    }
    std::string out;
    for (const auto& part : parts) out += (out.empty() ? "" : "\n\n") + part;
    return out;
}

NodeId refine_node(Project& project, const NodeId& node_id, const RefineSpec& spec, const engine::Engine& engine) {
    const ThoughtNode& original = project.tree.node(node_id);
    if (node_id == project.tree.root) throw Error(ErrorCode::RootSelected, "the root cannot be refined", node_id.value);
    const std::string prompt = refine_prompt(project, original, spec, engine.templates());
    auto check = [](const std::string& raw) {
        if (raw.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw Error(ErrorCode::EmptyRewrite, "the model returned an empty rewrite", "explanation");
        }
        anchor::parse_write_response(raw);
    };
    const auto parsed = anchor::parse_write_response(engine.ask(prompt, engine.config().refine_temperature, check));

    ThoughtNode refined;
    refined.action = original.action;
    refined.paragraph = parsed.explanation;
    refined.brief = parsed.summary;
    refined.origin = NodeOrigin::Refine;
    refined.anchor = original.anchor;  // same code, same intent
    if (refined.anchor) {
        refined.anchor->explanation = parsed.explanation;
        refined.anchor->summary = parsed.summary;
    }
    std::string how;
    if (spec.style) how += "style " + *spec.style;
    if (spec.detail) how += (how.empty() ? "" : ", ") + std::string(prompts::to_string(*spec.detail));
    if (spec.custom_prompt) how += (how.empty() ? "" : ", ") + std::string("custom prompt");
    refined.incoming_reason = "refined from " + node_id.value + " (" + how + ")";

    Project work = project;
    const NodeId parent = *original.parent;
    const NodeId id = attach_node(work.tree, std::move(refined), parent);
    if (work.active_chain.contains(node_id)) {
        const auto suffix = chain_suffix_after(work.active_chain, node_id);
        const auto copies = copy_run(work.tree, suffix, id);
        Chain chain = path_to(work.tree, id);
        chain.node_ids.insert(chain.node_ids.end(), copies.begin(), copies.end());
        work.active_chain = std::move(chain);
    }
    project = std::move(work);
    return id;
}

Chain adopt_alternative(Project& project, const NodeId& node_id, const NodeId& alternative_id) {
    const ThoughtNode& node = project.tree.node(node_id);
    const ThoughtNode& alt = project.tree.node(alternative_id);
    if (node_id == project.tree.root || alternative_id == project.tree.root) {
        throw Error(ErrorCode::RootSelected, "the root has no alternatives", project.tree.root.value);
    }
    if (node_id == alternative_id) {
        throw Error(ErrorCode::InvalidArgument, "a node is not its own alternative", node_id.value);
    }
    if (!project.active_chain.contains(node_id)) {
        throw Error(ErrorCode::NotOnActiveChain, node_id.value + " is not on the active chain", node_id.value);
    }
    if (intent_key(node) != intent_key(alt)) {
        throw Error(ErrorCode::IntentMismatch, "nodes have different intents", alternative_id.value);
    }
    Project work = project;
    const auto suffix = chain_suffix_after(work.active_chain, node_id);
    const auto copies = copy_run(work.tree, suffix, alternative_id);
    Chain chain = path_to(work.tree, alternative_id);
    chain.node_ids.insert(chain.node_ids.end(), copies.begin(), copies.end());
    work.active_chain = std::move(chain);
    project = std::move(work);
    return project.active_chain;
}

}  // namespace sprout::node_space
