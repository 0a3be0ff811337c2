#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "sprout/anchor.hpp"
#include "sprout/events.hpp"
#include "sprout/llm.hpp"
#include "sprout/model.hpp"
#include "sprout/project.hpp"
#include "sprout/prompts.hpp"

namespace sprout::engine {

struct GenerationBudget {
    int max_steps = 20;
    int k = 3;  // candidate thoughts per step
    int v = 3;  // voting completions per step

    /// Throws InvalidArgument unless every field is positive.
    void validate() const;
};

struct EngineConfig {
    double plan_temperature = 0.7;
    double vote_temperature = 0.0;
    double write_temperature = 0.0;
    double refine_temperature = 0.7;
    int max_tokens = 1024;
    int max_reasks = 2;
    std::optional<std::int64_t> seed;
};

struct PlanResult {
    std::string observation;
    std::vector<Thought> thoughts;
};

struct VoteResult {
    std::vector<Thought> thoughts;     // input order, votes filled
    std::vector<std::string> reasons;  // first stated reason per thought, may be empty
};

/// Parsed planning answer before any filtering.
struct RawPlan {
    std::string observation;
    std::vector<Thought> thoughts;
};

/// Reads OBSERVATION and THOUGHT lines. Thoughts whose action cannot be read
/// are skipped. Targets are taken as written, unclamped.
RawPlan parse_plan_response(std::string_view raw);

/// 1-based ballot from "VOTE: n", or nullopt when absent.
std::optional<int> parse_vote(std::string_view raw);
std::string parse_vote_reason(std::string_view raw);

/// Index of the most voted thought; ties go to the lowest index.
std::size_t choose_thought(const std::vector<Thought>& thoughts);

/// Title answers may be a bare "TITLE: ..." line; everything else goes through
/// the write-response parser.
anchor::ParsedWriteResponse parse_written(ActionType action, std::string_view raw);

/// A detached node built from a parsed answer. Only code explanations get an anchor.
ThoughtNode make_node(ActionType action, anchor::ParsedWriteResponse parsed, const SourceDocument& source,
                      std::optional<CodeRange> previous, NodeOrigin origin, int step_number);

/// Line-numbered source plus the tutorial so far. Older paragraphs appear as
/// briefs, the last two in full.
std::string render_context(const SourceDocument& source, const ThoughtTree& tree, const Chain& chain);

class Engine {
public:
    explicit Engine(const llm::Gateway& gateway,
                    prompts::PromptTemplateSet templates = prompts::PromptTemplateSet::defaults(),
                    EngineConfig config = {});

    PlanResult plan_step(const SourceDocument& source, const Chain& chain, const ThoughtTree& tree, int k) const;

    VoteResult vote_thoughts(const std::vector<Thought>& thoughts, const std::string& context, int v) const;

    /// Writes the paragraph for `thought`. The node is not attached.
    ThoughtNode execute_action(const SourceDocument& source, const Chain& chain, const ThoughtTree& tree,
                               const Thought& thought) const;

    /// Runs plan, vote, choose, execute until Finish, the step budget, or a stop
    /// request (honored between steps). Mutates `project` in place.
    Chain run_autopilot(Project& project, const GenerationBudget& budget, const EventSink& events,
                        std::stop_token pause = {}) const;

    /// Writes a code explanation for the selected lines and appends it to the chain.
    NodeId generate_for_selection(Project& project, const CodeRange& range) const;

    /// Sends `user_prompt` and passes the answer to `check`. When check throws a
    /// format error (MissingField, UnparseableResponse) the model is told so and
    /// asked again, at most max_reasks times. Returns the accepted answer.
    std::string ask(const std::string& user_prompt, double temperature,
                    const std::function<void(const std::string&)>& check) const;

    const prompts::PromptTemplateSet& templates() const noexcept { return templates_; }
    const EngineConfig& config() const noexcept { return config_; }
    const llm::Gateway& gateway() const noexcept { return gateway_; }

private:
    llm::ChatRequest request_for(std::vector<llm::Message> turns, double temperature) const;

    const llm::Gateway& gateway_;
    prompts::PromptTemplateSet templates_;
    EngineConfig config_;
};

// Event payloads. Live runs and replay build them through the same functions.
nlohmann::json step_started_payload(int step);
nlohmann::json observation_payload(int step, const std::string& observation);
nlohmann::json thoughts_payload(int step, const std::vector<Thought>& thoughts);
nlohmann::json votes_payload(int step, const std::vector<Thought>& thoughts, std::size_t chosen);
nlohmann::json node_payload(int step, const ThoughtNode& node);
nlohmann::json anchor_payload(int step, const ThoughtNode& node);
nlohmann::json chain_payload(const Chain& chain);
nlohmann::json finished_payload(const std::string& reason, const Chain& chain);
nlohmann::json error_payload(const Error& error);

/// Config key holding the per-run log used by replay.
inline constexpr const char* kRunLogKey = "autopilot.runs";

/// Rebuilds the event sequence of every recorded autopilot run.
std::vector<Event> replay_events(const Project& project);

}  // namespace sprout::engine
