#include "sprout/engine.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <regex>

#include "sprout/error.hpp"
#include "sprout/serialize.hpp"

namespace sprout::engine {

using nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    for (auto& line : lines) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
    }
    return lines;
}

std::string squash(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

// The action named at the start of a thought head, e.g. "write code explanation [lines 3-5]".
std::optional<ActionType> leading_action(std::string_view head) {
    const std::string squashed = squash(head);
    static constexpr ActionType kAll[] = {ActionType::WriteTitle,         ActionType::WriteBackground,
                                          ActionType::WriteCodeExplanation, ActionType::WriteNotification,
                                          ActionType::WriteSummary,       ActionType::Finish};
    for (ActionType action : kAll) {
        const std::string name = squash(to_string(action));
        if (squashed.rfind(name, 0) == 0) return action;
    }
    return std::nullopt;
}

std::string truncate_words(std::string_view text, int max_words) {
    std::string out;
    int words = 0;
    std::size_t i = 0;
    while (i < text.size() && words < max_words) {
        while (i < text.size() && is_space(text[i])) ++i;
        if (i >= text.size()) break;
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j])) ++j;
        if (!out.empty()) out.push_back(' ');
        out.append(text.substr(i, j - i));
        ++words;
        i = j;
    }
    return out;
}

const std::regex& label_regex() {
    static const std::regex re(R"(^\s*[*#]*\s*(OBSERVATION|THOUGHT\s*#?\s*\d*|ACTION)\s*\**\s*:\s*\**\s*(.*)$)",
                               std::regex::icase);
    return re;
}

Error format_error(const std::string& what) { return Error(ErrorCode::UnparseableResponse, what, "format"); }

// Applies the post-parse rules shared by planning and its re-ask check.
std::vector<Thought> usable_thoughts(std::vector<Thought> raw, const SourceDocument& source, const ThoughtTree& tree,
                                     const Chain& chain, int k) {
    const bool has_title = chain_has_action(tree, chain, ActionType::WriteTitle);
    std::vector<Thought> kept;
    for (auto& thought : raw) {
        if (thought.action == ActionType::WriteTitle && has_title) continue;
        if (thought.action != ActionType::WriteCodeExplanation) {
            thought.target.reset();
        } else {
            if (!thought.target) continue;
            auto& t = *thought.target;
            if (t.start_line > t.end_line) std::swap(t.start_line, t.end_line);
            const int last = source.line_count();
            t.start_line = std::clamp(t.start_line, 1, last);
            t.end_line = std::clamp(t.end_line, 1, last);
        }
        thought.votes = 0;
        kept.push_back(std::move(thought));
    }
    if (kept.size() > static_cast<std::size_t>(k)) kept.resize(static_cast<std::size_t>(k));
    return kept;
}

std::string describe_thought(const Thought& thought) {
    std::string out(action_phrase(thought.action));
    if (thought.target) {
        out += " [lines " + std::to_string(thought.target->start_line) + "-" +
               std::to_string(thought.target->end_line) + "]";
    }
    if (!thought.rationale.empty()) out += " | " + thought.rationale;
    return out;
}

std::string format_hint(ActionType action) {
    switch (action) {
        case ActionType::WriteTitle:
            return "Answer with a single line \"TITLE: <the title>\".";
        case ActionType::WriteCodeExplanation:
            return "Answer with STEP, CODE, EXPLANATION and SUMMARY fields. Copy the explained lines into CODE exactly "
                   "as they appear in the source, without line numbers.";
        default:
            return "Answer with STEP, EXPLANATION and SUMMARY fields and leave CODE empty.";
    }
}

std::string range_text(const CodeRange& range) {
    return "lines " + std::to_string(range.start_line) + "-" + std::to_string(range.end_line);
}

json run_log(const Project& project) {
    auto it = project.config.find(kRunLogKey);
    if (it == project.config.end()) return json::array();
    json parsed = json::parse(it->second, nullptr, false);
    return parsed.is_array() ? parsed : json::array();
}

void append_run(Project& project, int first_step, int step_count, const json& terminal) {
    json log = run_log(project);
    log.push_back({{"first_step", first_step}, {"step_count", step_count}, {"terminal", terminal}});
    project.config[kRunLogKey] = log.dump();
}

}  // namespace

void GenerationBudget::validate() const {
    if (max_steps < 1 || k < 1 || v < 1) {
        throw Error(ErrorCode::InvalidArgument, "budget values must be positive", "budget");
    }
}

RawPlan parse_plan_response(std::string_view raw) {
    RawPlan plan;
    static const std::regex range_re(R"(lines?\s*(\d+)\s*(?:-|–|to)\s*(\d+)|lines?\s*(\d+))", std::regex::icase);
    std::string* collecting = nullptr;
    for (const auto& line : lines_of(raw)) {
        std::smatch m;
        if (!std::regex_match(line, m, label_regex())) {
            if (collecting && !trim(line).empty()) *collecting += "\n" + trim(line);
            continue;
        }
        const std::string label = squash(m[1].str());
        const std::string rest = trim(m[2].str());
        collecting = nullptr;
        if (label == "observation") {
            plan.observation = rest;
            collecting = &plan.observation;
            continue;
        }
        if (label.rfind("thought", 0) != 0) continue;  // ACTION is advisory only

        const auto bar = rest.find('|');
        const std::string head = trim(rest.substr(0, bar));
        const std::string rationale = bar == std::string::npos ? std::string() : trim(rest.substr(bar + 1));
        auto action = leading_action(head);
        if (!action) continue;
        Thought thought;
        thought.action = *action;
        thought.rationale = rationale;
        std::smatch r;
        if (std::regex_search(head, r, range_re)) {
            CodeRange range;
            if (r[1].matched) {
                range.start_line = std::stoi(r[1].str());
                range.end_line = std::stoi(r[2].str());
            } else {
                range.start_line = range.end_line = std::stoi(r[3].str());
            }
            thought.target = range;
        }
        plan.thoughts.push_back(std::move(thought));
    }
    return plan;
}

std::optional<int> parse_vote(std::string_view raw) {
    static const std::regex re(R"(VOTE\s*\**\s*:?\s*\**\s*(?:thought\s*)?#?\s*(\d+))", std::regex::icase);
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(raw.begin(), raw.end(), m, re)) return std::nullopt;
    try {
        return std::stoi(m[1].str());
    } catch (const std::out_of_range&) {
        return std::nullopt;
    }
}

std::string parse_vote_reason(std::string_view raw) {
    static const std::regex re(R"(REASON\s*\**\s*:\s*\**\s*([^\n]*))", std::regex::icase);
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(raw.begin(), raw.end(), m, re)) return {};
    return trim(m[1].str());
}

std::size_t choose_thought(const std::vector<Thought>& thoughts) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < thoughts.size(); ++i) {
        if (thoughts[i].votes > thoughts[best].votes) best = i;
    }
    return best;
}

anchor::ParsedWriteResponse parse_written(ActionType action, std::string_view raw) {
    if (action == ActionType::WriteTitle) {
        static const std::regex re(R"(^\s*[*#]*\s*TITLE\s*\**\s*:\s*\**\s*(.*?)\s*\**\s*$)", std::regex::icase);
        for (const auto& line : lines_of(raw)) {
            std::smatch m;
            if (std::regex_match(line, m, re) && !trim(m[1].str()).empty()) {
                anchor::ParsedWriteResponse parsed;
                parsed.explanation = trim(m[1].str());
                parsed.summary = truncate_words(parsed.explanation, anchor::kMaxSummaryWords);
                return parsed;
            }
        }
    }
    return anchor::parse_write_response(raw);
}

ThoughtNode make_node(ActionType action, anchor::ParsedWriteResponse parsed, const SourceDocument& source,
                      std::optional<CodeRange> previous, NodeOrigin origin, int step_number) {
    ThoughtNode node;
    node.action = action;
    node.origin = origin;
    node.paragraph = parsed.explanation;
    node.brief = parsed.summary;
    if (action == ActionType::WriteCodeExplanation) {
        if (parsed.step_number <= 0) parsed.step_number = step_number;
        node.anchor = anchor::resolve_anchor(parsed, source, previous);
    }
    return node;
}

std::string render_context(const SourceDocument& source, const ThoughtTree& tree, const Chain& chain) {
    std::string out = "Source code (" + source.language_tag() + "):\n```" + source.language_tag() + "\n";
    const int width = static_cast<int>(std::to_string(source.line_count()).size());
    char number[32];
    for (int line = 1; line <= source.line_count(); ++line) {
        std::snprintf(number, sizeof number, "%*d | ", width, line);
        out += number;
        out.append(source.line(line));
        out.push_back('\n');
    }
    out += "```\n\n";

    const std::size_t written = chain.size() - 1;
    if (written == 0) {
        out += "No paragraphs have been written yet.\n";
        return out;
    }
    out += "Tutorial written so far (" + std::to_string(written) + " paragraphs):\n";
    for (std::size_t i = 1; i < chain.size(); ++i) {
        const auto& node = tree.node(chain.node_ids[i]);
        out += "Paragraph " + std::to_string(i) + " (" + std::string(action_phrase(node.action));
        if (node.anchor && node.anchor->resolved) out += ", " + range_text(*node.anchor->resolved);
        out += ")";
        if (i + 2 > written) {
            out += ":\n" + node.paragraph + "\n";
        } else {
            out += ": " + node.brief + "\n";
        }
    }
    return out;
}

Engine::Engine(const llm::Gateway& gateway, prompts::PromptTemplateSet templates, EngineConfig config)
    : gateway_(gateway), templates_(std::move(templates)), config_(config) {}

llm::ChatRequest Engine::request_for(std::vector<llm::Message> turns, double temperature) const {
    llm::ChatRequest request;
    request.messages.push_back({llm::Role::System, templates_.get(prompts::TemplateKind::System)});
    for (auto& turn : turns) request.messages.push_back(std::move(turn));
    request.temperature = temperature;
    request.max_tokens = config_.max_tokens;
    request.seed = config_.seed;
    return request;
}

std::string Engine::ask(const std::string& user_prompt, double temperature,
                        const std::function<void(const std::string&)>& check) const {
    std::vector<llm::Message> turns{{llm::Role::User, user_prompt}};
    for (int attempt = 0;; ++attempt) {
        const auto response = gateway_.complete(request_for(turns, temperature));
        try {
            check(response.content);
            return response.content;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MissingField && e.code() != ErrorCode::UnparseableResponse) throw;
            if (attempt >= config_.max_reasks) {
                throw Error(ErrorCode::UnparseableResponse,
                            "model output could not be parsed after " + std::to_string(attempt + 1) +
                                " attempts: " + e.what(),
                            e.detail());
            }
            turns.push_back({llm::Role::Assistant, response.content});
            turns.push_back({llm::Role::User, "Your answer could not be parsed (" + std::string(e.what()) +
                                                  "). Answer again using exactly the requested format."});
        }
    }
}

PlanResult Engine::plan_step(const SourceDocument& source, const Chain& chain, const ThoughtTree& tree,
                             int k) const {
    if (!chain_valid(tree, chain)) throw Error(ErrorCode::InvalidArgument, "chain is not valid in the tree", "chain");
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be positive", "k");
    const std::string prompt = prompts::render(templates_.get(prompts::TemplateKind::Plan),
                                               {{"context", render_context(source, tree, chain)},
                                                {"written", std::to_string(chain.size() - 1)},
                                                {"k", std::to_string(k)}});
    auto check = [&](const std::string& raw) {
        if (usable_thoughts(parse_plan_response(raw).thoughts, source, tree, chain, k).empty()) {
            throw format_error("no usable THOUGHT line");
        }
    };
    const std::string raw = ask(prompt, config_.plan_temperature, check);
    RawPlan plan = parse_plan_response(raw);
    PlanResult result;
    result.observation = plan.observation;
    result.thoughts = usable_thoughts(std::move(plan.thoughts), source, tree, chain, k);

    // Finish stays reachable once the tutorial has a summary.
    const bool offers_finish = std::any_of(result.thoughts.begin(), result.thoughts.end(),
                                           [](const Thought& t) { return t.action == ActionType::Finish; });
    if (!offers_finish && chain_has_action(tree, chain, ActionType::WriteSummary)) {
        result.thoughts.push_back({ActionType::Finish, "The tutorial already ends with a summary.", std::nullopt, 0});
    }
    return result;
}

VoteResult Engine::vote_thoughts(const std::vector<Thought>& thoughts, const std::string& context, int v) const {
    if (thoughts.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to vote on", "thoughts");
    if (v < 1) throw Error(ErrorCode::InvalidArgument, "v must be positive", "v");
    std::string listing;
    for (std::size_t i = 0; i < thoughts.size(); ++i) {
        listing += "THOUGHT " + std::to_string(i + 1) + ": " + describe_thought(thoughts[i]) + "\n";
    }
    VoteResult result;
    result.thoughts = thoughts;
    for (auto& t : result.thoughts) t.votes = 0;
    result.reasons.assign(thoughts.size(), {});
    for (int ballot = 1; ballot <= v; ++ballot) {
        const std::string prompt = prompts::render(templates_.get(prompts::TemplateKind::Vote),
                                                   {{"context", context},
                                                    {"thoughts", listing},
                                                    {"ballot", std::to_string(ballot)},
                                                    {"ballots", std::to_string(v)}});
        const auto response = gateway_.complete(request_for({{llm::Role::User, prompt}}, config_.vote_temperature));
        const auto vote = parse_vote(response.content);
        if (!vote || *vote < 1 || static_cast<std::size_t>(*vote) > thoughts.size()) continue;
        const auto index = static_cast<std::size_t>(*vote - 1);
        ++result.thoughts[index].votes;
        if (result.reasons[index].empty()) result.reasons[index] = parse_vote_reason(response.content);
    }
    return result;
}

ThoughtNode Engine::execute_action(const SourceDocument& source, const Chain& chain, const ThoughtTree& tree,
                                   const Thought& thought) const {
    if (thought.action == ActionType::Finish) {
        throw Error(ErrorCode::InvalidArgument, "Finish produces no paragraph", "action");
    }
    const int step = static_cast<int>(chain.size());
    std::string target;
    std::string target_block;
    if (thought.action == ActionType::WriteCodeExplanation && thought.target) {
        target = " for " + range_text(*thought.target);
        target_block = prompts::code_block(slice_lines(source, *thought.target), source.language_tag());
    }
    const std::string prompt = prompts::render(templates_.get(prompts::TemplateKind::Write),
                                               {{"action", std::string(action_phrase(thought.action))},
                                                {"target", target},
                                                {"target_block", target_block},
                                                {"context", render_context(source, tree, chain)},
                                                {"step", std::to_string(step)},
                                                {"format_hint", format_hint(thought.action)}});
    const std::string raw =
        ask(prompt, config_.write_temperature, [&](const std::string& r) { parse_written(thought.action, r); });
    return make_node(thought.action, parse_written(thought.action, raw), source, last_resolved_range(tree, chain),
                     NodeOrigin::Agent, step);
}

Chain Engine::run_autopilot(Project& project, const GenerationBudget& budget, const EventSink& events,
                            std::stop_token pause) const {
    budget.validate();
    auto emit = [&](EventKind kind, json payload) {
        if (events) events(Event{kind, std::move(payload)});
    };
    const int first_step = static_cast<int>(project.steps.size()) + 1;
    auto finish_run = [&](EventKind kind, json payload) {
        append_run(project, first_step, static_cast<int>(project.steps.size()) + 1 - first_step,
                   {{"kind", std::string(to_string(kind))}, {"payload", payload}});
        emit(kind, std::move(payload));
    };

    for (int i = 0; i < budget.max_steps; ++i) {
        if (pause.stop_requested()) {
            finish_run(EventKind::Paused, chain_payload(project.active_chain));
            return project.active_chain;
        }
        const int step = static_cast<int>(project.steps.size()) + 1;
        try {
            emit(EventKind::StepStarted, step_started_payload(step));
            auto plan = plan_step(project.source, project.active_chain, project.tree, budget.k);
            emit(EventKind::Observation, observation_payload(step, plan.observation));
            emit(EventKind::ThoughtsProposed, thoughts_payload(step, plan.thoughts));

            const std::string context = render_context(project.source, project.tree, project.active_chain);
            auto voted = vote_thoughts(plan.thoughts, context, budget.v);
            const std::size_t chosen = choose_thought(voted.thoughts);
            emit(EventKind::Votes, votes_payload(step, voted.thoughts, chosen));

            AgentStep record;
            record.step_index = step;
            record.observation = plan.observation;
            record.thoughts = voted.thoughts;
            record.chosen_index = chosen;

            const Thought& pick = voted.thoughts[chosen];
            std::optional<ThoughtNode> node;
            if (pick.action != ActionType::Finish) {
                node = execute_action(project.source, project.active_chain, project.tree, pick);
                node->incoming_votes = pick.votes;
                node->incoming_reason = voted.reasons[chosen].empty() ? pick.rationale : voted.reasons[chosen];
            }

            // Everything below only touches the project once the step has fully succeeded.
            const NodeId tail = project.active_chain.tail();
            for (std::size_t t = 0; t < voted.thoughts.size(); ++t) {
                if (t != chosen) add_stub(project.tree, tail, voted.thoughts[t]);
            }
            if (!node) {
                project.steps.push_back(std::move(record));
                finish_run(EventKind::Finished, finished_payload("finish", project.active_chain));
                return project.active_chain;
            }
            const NodeId id = attach_node(project.tree, std::move(*node), tail);
            project.active_chain.node_ids.push_back(id);
            record.produced_node = id;
            project.steps.push_back(std::move(record));

            const ThoughtNode& created = project.tree.node(id);
            emit(EventKind::NodeCreated, node_payload(step, created));
            if (created.anchor) emit(EventKind::AnchorResolved, anchor_payload(step, created));
        } catch (const Error& e) {
            finish_run(EventKind::Error, error_payload(e));
            throw;
        }
    }
    finish_run(EventKind::Finished, finished_payload("budget", project.active_chain));
    return project.active_chain;
}

NodeId Engine::generate_for_selection(Project& project, const CodeRange& range) const {
    if (!range.valid_in(project.source)) {
        throw Error(ErrorCode::InvalidArgument, "selection is outside the source", range_text(range));
    }
    const int step = static_cast<int>(project.active_chain.size());
    prompts::InterventionParams params;
    params.code = slice_lines(project.source, range);
    params.language = project.source.language_tag();
    params.context = render_context(project.source, project.tree, project.active_chain);
    params.step = step;
    const std::string prompt =
        prompts::build_intervention_prompt(templates_, prompts::InterventionKind::UserDefinedGeneration, params);
    const std::string raw = ask(prompt, config_.write_temperature,
                                [](const std::string& r) { anchor::parse_write_response(r); });
    ThoughtNode node = make_node(ActionType::WriteCodeExplanation, anchor::parse_write_response(raw), project.source,
                                 last_resolved_range(project.tree, project.active_chain), NodeOrigin::UserDefined,
                                 step);
    node.incoming_reason = "selected " + range_text(range);
    const NodeId id = attach_node(project.tree, std::move(node), project.active_chain.tail());
    project.active_chain.node_ids.push_back(id);
    return id;
}

json step_started_payload(int step) { return {{"step", step}}; }

json observation_payload(int step, const std::string& observation) {
    return {{"step", step}, {"observation", observation}};
}

json thoughts_payload(int step, const std::vector<Thought>& thoughts) {
    json list = json::array();
    for (Thought t : thoughts) {
        t.votes = 0;
        list.push_back(t);
    }
    return {{"step", step}, {"thoughts", list}};
}

json votes_payload(int step, const std::vector<Thought>& thoughts, std::size_t chosen) {
    json votes = json::array();
    for (const auto& t : thoughts) votes.push_back(t.votes);
    return {{"step", step}, {"votes", votes}, {"chosen", chosen}};
}

json node_payload(int step, const ThoughtNode& node) { return {{"step", step}, {"node", node}}; }

json anchor_payload(int step, const ThoughtNode& node) {
    return {{"step", step}, {"node_id", node.id}, {"anchor", node.anchor ? json(*node.anchor) : json(nullptr)}};
}

json chain_payload(const Chain& chain) { return {{"chain", chain}}; }

json finished_payload(const std::string& reason, const Chain& chain) {
    return {{"reason", reason}, {"chain", chain}};
}

json error_payload(const Error& error) {
    return {{"code", std::string(to_string(error.code()))}, {"message", error.what()}, {"detail", error.detail()}};
}

std::vector<Event> replay_events(const Project& project) {
    std::vector<Event> events;
    auto replay_step = [&](const AgentStep& step) {
        const int s = step.step_index;
        events.push_back({EventKind::StepStarted, step_started_payload(s)});
        events.push_back({EventKind::Observation, observation_payload(s, step.observation)});
        events.push_back({EventKind::ThoughtsProposed, thoughts_payload(s, step.thoughts)});
        events.push_back({EventKind::Votes, votes_payload(s, step.thoughts, step.chosen_index)});
        if (!step.produced_node) return;
        if (!project.tree.contains(*step.produced_node)) {
            // Trimmed since; only the id is known.
            events.push_back({EventKind::NodeCreated, {{"step", s}, {"node", {{"id", *step.produced_node}}}}});
            return;
        }
        const auto& node = project.tree.node(*step.produced_node);
        events.push_back({EventKind::NodeCreated, node_payload(s, node)});
        if (node.anchor) events.push_back({EventKind::AnchorResolved, anchor_payload(s, node)});
    };

    std::size_t next = 0;
    for (const auto& run : run_log(project)) {
        const int first = run.value("first_step", 1);
        const int count = run.value("step_count", 0);
        for (; next < project.steps.size() && project.steps[next].step_index < first + count; ++next) {
            replay_step(project.steps[next]);
        }
        const json& terminal = run["terminal"];
        if (auto kind = parse_event_kind(terminal.value("kind", ""))) {
            events.push_back({*kind, terminal.value("payload", json::object())});
        }
    }
    for (; next < project.steps.size(); ++next) replay_step(project.steps[next]);
    return events;
}

}  // namespace sprout::engine
