#include "sprout/serialize.hpp"

#include <algorithm>
#include <set>

#include "sprout/error.hpp"

namespace sprout {

namespace {

[[noreturn]] void schema_error(const std::string& pointer, const std::string& what) {
    throw Error(ErrorCode::SchemaError, "field " + pointer + ": " + what, pointer);
}

const Json& member(const Json& j, const std::string& pointer, const char* key) {
    if (!j.is_object()) schema_error(pointer, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) schema_error(pointer + "/" + key, "missing");
    return *it;
}

std::string get_string(const Json& j, const std::string& pointer, const char* key) {
    const Json& v = member(j, pointer, key);
    if (!v.is_string()) schema_error(pointer + "/" + key, "expected a string");
    return v.get<std::string>();
}

std::int64_t get_int(const Json& j, const std::string& pointer, const char* key) {
    const Json& v = member(j, pointer, key);
    if (!v.is_number_integer()) schema_error(pointer + "/" + key, "expected an integer");
    return v.get<std::int64_t>();
}

bool get_bool(const Json& j, const std::string& pointer, const char* key) {
    const Json& v = member(j, pointer, key);
    if (!v.is_boolean()) schema_error(pointer + "/" + key, "expected a boolean");
    return v.get<bool>();
}

const Json& get_array(const Json& j, const std::string& pointer, const char* key) {
    const Json& v = member(j, pointer, key);
    if (!v.is_array()) schema_error(pointer + "/" + key, "expected an array");
    return v;
}

ActionType get_action(const Json& j, const std::string& pointer, const char* key) {
    auto action = parse_action(get_string(j, pointer, key));
    if (!action) schema_error(pointer + "/" + key, "unknown action");
    return *action;
}

template <typename Decode>
auto get_optional(const Json& j, const std::string& pointer, const char* key, Decode decode)
    -> std::optional<decltype(decode(j, pointer))> {
    const Json& v = member(j, pointer, key);
    if (v.is_null()) return std::nullopt;
    return decode(v, pointer + "/" + key);
}

NodeId decode_id(const Json& j, const std::string& pointer) {
    if (!j.is_string() || j.get<std::string>().empty()) schema_error(pointer, "expected a node id");
    return NodeId(j.get<std::string>());
}

}  // namespace

void to_json(Json& j, const NodeId& id) { j = id.value; }

void to_json(Json& j, const CodeRange& range) {
    j = Json{{"start_line", range.start_line}, {"end_line", range.end_line}};
}

template <typename T>
Json optional_json(const std::optional<T>& value) {
    return value ? Json(*value) : Json(nullptr);
}

void to_json(Json& j, const Thought& thought) {
    j = Json{{"action", to_string(thought.action)},
             {"rationale", thought.rationale},
             {"target", optional_json(thought.target)},
             {"votes", thought.votes}};
}

void to_json(Json& j, const AgentStep& step) {
    j = Json{{"step_index", step.step_index},
             {"observation", step.observation},
             {"thoughts", step.thoughts},
             {"chosen_index", step.chosen_index},
             {"produced_node", optional_json(step.produced_node)}};
}

void to_json(Json& j, const TextCodeAnchor& anchor) {
    j = Json{{"step_number", anchor.step_number},
             {"quoted_code", anchor.quoted_code},
             {"resolved", optional_json(anchor.resolved)},
             {"status", to_string(anchor.status)},
             {"explanation", anchor.explanation},
             {"summary", anchor.summary},
             {"ambiguous", anchor.ambiguous}};
}

void to_json(Json& j, const ThoughtNode& node) {
    j = Json{{"id", node.id},
             {"serial", node.serial},
             {"parent", optional_json(node.parent)},
             {"action", to_string(node.action)},
             {"paragraph", node.paragraph},
             {"brief", node.brief},
             {"anchor", optional_json(node.anchor)},
             {"incoming_votes", node.incoming_votes},
             {"incoming_reason", node.incoming_reason},
             {"origin", to_string(node.origin)},
             {"needs_review", node.needs_review}};
}

void to_json(Json& j, const ThoughtStub& stub) {
    j = Json{{"id", stub.id}, {"serial", stub.serial}, {"parent", stub.parent}, {"thought", stub.thought}};
}

void to_json(Json& j, const ThoughtTree& tree) {
    std::vector<const ThoughtNode*> ordered;
    for (const auto& [_, node] : tree.nodes) ordered.push_back(&node);
    std::sort(ordered.begin(), ordered.end(),
              [](const ThoughtNode* a, const ThoughtNode* b) { return a->serial < b->serial; });
    Json nodes = Json::array();
    for (const auto* node : ordered) nodes.push_back(*node);
    j = Json{{"root", tree.root}, {"next_serial", tree.next_serial}, {"nodes", nodes}, {"stubs", tree.stubs}};
}

void to_json(Json& j, const Chain& chain) { j = chain.node_ids; }

void to_json(Json& j, const IntentKey& key) {
    j = Json{{"action", to_string(key.action)}, {"target", optional_json(key.target)}};
}

void to_json(Json& j, const Project& project) {
    j = Json{{"schema_version", project.schema_version},
             {"id", project.id},
             {"seed", project.seed},
             {"config", project.config},
             {"source", {{"language_tag", project.source.language_tag()}, {"text", project.source.text()}}},
             {"tree", project.tree},
             {"active_chain", project.active_chain},
             {"steps", project.steps},
             {"embeddings", project.embeddings}};
}

CodeRange decode_range(const Json& j, const std::string& pointer) {
    CodeRange range;
    range.start_line = static_cast<int>(get_int(j, pointer, "start_line"));
    range.end_line = static_cast<int>(get_int(j, pointer, "end_line"));
    if (range.start_line < 1 || range.end_line < range.start_line) schema_error(pointer, "invalid line range");
    return range;
}

Thought decode_thought(const Json& j, const std::string& pointer) {
    Thought thought;
    thought.action = get_action(j, pointer, "action");
    thought.rationale = get_string(j, pointer, "rationale");
    thought.target = get_optional(j, pointer, "target", decode_range);
    thought.votes = static_cast<int>(get_int(j, pointer, "votes"));
    if (thought.votes < 0) schema_error(pointer + "/votes", "negative");
    if ((thought.action == ActionType::WriteCodeExplanation) != thought.target.has_value()) {
        schema_error(pointer + "/target", "target present iff the action is a code explanation");
    }
    return thought;
}

TextCodeAnchor decode_anchor(const Json& j, const std::string& pointer) {
    TextCodeAnchor anchor;
    anchor.step_number = static_cast<int>(get_int(j, pointer, "step_number"));
    anchor.quoted_code = get_string(j, pointer, "quoted_code");
    anchor.resolved = get_optional(j, pointer, "resolved", decode_range);
    auto status = parse_anchor_status(get_string(j, pointer, "status"));
    if (!status) schema_error(pointer + "/status", "unknown anchor status");
    anchor.status = *status;
    anchor.explanation = get_string(j, pointer, "explanation");
    anchor.summary = get_string(j, pointer, "summary");
    anchor.ambiguous = get_bool(j, pointer, "ambiguous");
    if (anchor.step_number < 1) schema_error(pointer + "/step_number", "must be positive");
    return anchor;
}

ThoughtNode decode_node(const Json& j, const std::string& pointer) {
    ThoughtNode node;
    node.id = decode_id(member(j, pointer, "id"), pointer + "/id");
    const auto serial = get_int(j, pointer, "serial");
    if (serial < 0) schema_error(pointer + "/serial", "negative");
    node.serial = static_cast<std::uint64_t>(serial);
    node.parent = get_optional(j, pointer, "parent", decode_id);
    node.action = get_action(j, pointer, "action");
    node.paragraph = get_string(j, pointer, "paragraph");
    node.brief = get_string(j, pointer, "brief");
    node.anchor = get_optional(j, pointer, "anchor", decode_anchor);
    node.incoming_votes = static_cast<int>(get_int(j, pointer, "incoming_votes"));
    node.incoming_reason = get_string(j, pointer, "incoming_reason");
    auto origin = parse_origin(get_string(j, pointer, "origin"));
    if (!origin) schema_error(pointer + "/origin", "unknown origin");
    node.origin = *origin;
    node.needs_review = get_bool(j, pointer, "needs_review");
    return node;
}

ThoughtTree decode_tree(const Json& j, const std::string& pointer) {
    ThoughtTree tree;
    tree.root = decode_id(member(j, pointer, "root"), pointer + "/root");
    const auto next = get_int(j, pointer, "next_serial");
    if (next < 0) schema_error(pointer + "/next_serial", "negative");
    tree.next_serial = static_cast<std::uint64_t>(next);
    const Json& nodes = get_array(j, pointer, "nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = pointer + "/nodes/" + std::to_string(i);
        ThoughtNode node = decode_node(nodes[i], where);
        if (node.serial >= tree.next_serial) schema_error(where + "/serial", "not below next_serial");
        NodeId id = node.id;
        if (!tree.nodes.emplace(id, std::move(node)).second) schema_error(where + "/id", "duplicate id");
    }
    const Json& stubs = get_array(j, pointer, "stubs");
    for (std::size_t i = 0; i < stubs.size(); ++i) {
        const std::string where = pointer + "/stubs/" + std::to_string(i);
        ThoughtStub stub;
        stub.id = decode_id(member(stubs[i], where, "id"), where + "/id");
        const auto serial = get_int(stubs[i], where, "serial");
        if (serial < 0 || static_cast<std::uint64_t>(serial) >= tree.next_serial) {
            schema_error(where + "/serial", "not below next_serial");
        }
        stub.serial = static_cast<std::uint64_t>(serial);
        stub.parent = decode_id(member(stubs[i], where, "parent"), where + "/parent");
        stub.thought = decode_thought(member(stubs[i], where, "thought"), where + "/thought");
        tree.stubs.push_back(std::move(stub));
    }
    return tree;
}

Chain decode_chain(const Json& j, const std::string& pointer) {
    if (!j.is_array()) schema_error(pointer, "expected an array");
    Chain chain;
    for (std::size_t i = 0; i < j.size(); ++i) {
        chain.node_ids.push_back(decode_id(j[i], pointer + "/" + std::to_string(i)));
    }
    return chain;
}

AgentStep decode_step(const Json& j, const std::string& pointer) {
    AgentStep step;
    step.step_index = static_cast<int>(get_int(j, pointer, "step_index"));
    if (step.step_index < 1) schema_error(pointer + "/step_index", "must be positive");
    step.observation = get_string(j, pointer, "observation");
    const Json& thoughts = get_array(j, pointer, "thoughts");
    for (std::size_t i = 0; i < thoughts.size(); ++i) {
        step.thoughts.push_back(decode_thought(thoughts[i], pointer + "/thoughts/" + std::to_string(i)));
    }
    const auto chosen = get_int(j, pointer, "chosen_index");
    if (chosen < 0 || static_cast<std::size_t>(chosen) >= step.thoughts.size()) {
        schema_error(pointer + "/chosen_index", "out of range");
    }
    step.chosen_index = static_cast<std::size_t>(chosen);
    step.produced_node = get_optional(j, pointer, "produced_node", decode_id);
    const bool finished = step.thoughts[step.chosen_index].action == ActionType::Finish;
    if (finished == step.produced_node.has_value()) {
        schema_error(pointer + "/produced_node", "present iff the chosen action is not Finish");
    }
    return step;
}

Project decode_project(const Json& j) {
    if (!j.is_object()) schema_error("", "expected an object");
    const Json& version = member(j, "", "schema_version");
    if (!version.is_number_integer() || version.get<std::int64_t>() != kSchemaVersion) {
        throw Error(ErrorCode::SchemaError, "unsupported schema version", "/schema_version");
    }

    Project project;
    project.schema_version = kSchemaVersion;
    project.id = get_string(j, "", "id");
    project.seed = get_int(j, "", "seed");

    const Json& config = member(j, "", "config");
    if (!config.is_object()) schema_error("/config", "expected an object");
    for (const auto& [key, value] : config.items()) {
        if (!value.is_string()) schema_error("/config/" + key, "expected a string");
        project.config[key] = value.get<std::string>();
    }

    const Json& source = member(j, "", "source");
    project.source = SourceDocument(get_string(source, "/source", "language_tag"), get_string(source, "/source", "text"));

    project.tree = decode_tree(member(j, "", "tree"), "/tree");
    for (const auto& violation : validate_tree(project.tree)) schema_error("/tree", violation);
    for (const auto& [id, node] : project.tree.nodes) {
        if (node.anchor && node.anchor->resolved && !node.anchor->resolved->valid_in(project.source)) {
            schema_error("/tree", "anchor outside source: " + id.value);
        }
    }

    project.active_chain = decode_chain(member(j, "", "active_chain"), "/active_chain");
    if (!chain_valid(project.tree, project.active_chain)) schema_error("/active_chain", "not a root path");

    const Json& steps = get_array(j, "", "steps");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        project.steps.push_back(decode_step(steps[i], "/steps/" + std::to_string(i)));
    }

    const Json& embeddings = member(j, "", "embeddings");
    if (!embeddings.is_object()) schema_error("/embeddings", "expected an object");
    for (const auto& [key, value] : embeddings.items()) {
        const std::string where = "/embeddings/" + key;
        if (!value.is_array()) schema_error(where, "expected an array");
        std::vector<double> vector;
        for (const auto& x : value) {
            if (!x.is_number()) schema_error(where, "expected numbers");
            vector.push_back(x.get<double>());
        }
        project.embeddings[key] = std::move(vector);
    }
    return project;
}

}  // namespace sprout
