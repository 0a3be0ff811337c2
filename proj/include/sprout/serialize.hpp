#pragma once

#include <string>

#include <json.hpp>

#include "sprout/model.hpp"
#include "sprout/project.hpp"

// JSON forms of the domain types. Field names are the snake_case model names.
// Decoders throw SchemaError whose detail is the JSON pointer of the bad value.
namespace sprout {

using Json = nlohmann::json;

void to_json(Json& j, const NodeId& id);
void to_json(Json& j, const CodeRange& range);
void to_json(Json& j, const Thought& thought);
void to_json(Json& j, const AgentStep& step);
void to_json(Json& j, const TextCodeAnchor& anchor);
void to_json(Json& j, const ThoughtNode& node);
void to_json(Json& j, const ThoughtStub& stub);
void to_json(Json& j, const ThoughtTree& tree);
void to_json(Json& j, const Chain& chain);
void to_json(Json& j, const IntentKey& key);
void to_json(Json& j, const Project& project);

CodeRange decode_range(const Json& j, const std::string& pointer);
Thought decode_thought(const Json& j, const std::string& pointer);
TextCodeAnchor decode_anchor(const Json& j, const std::string& pointer);
ThoughtNode decode_node(const Json& j, const std::string& pointer);
ThoughtTree decode_tree(const Json& j, const std::string& pointer);
Chain decode_chain(const Json& j, const std::string& pointer);
AgentStep decode_step(const Json& j, const std::string& pointer);

/// Decodes and re-validates every project invariant.
Project decode_project(const Json& j);

}  // namespace sprout
