#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sprout/error.hpp"

namespace sprout::llm {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct Message {
    Role role = Role::User;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct ChatRequest {
    std::vector<Message> messages;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;

    bool operator==(const ChatRequest&) const = default;
};

/// Throws InvalidArgument when the request breaks its invariants.
void validate(const ChatRequest& request);

/// Content of the last user message, or empty.
std::string_view last_user_message(const ChatRequest& request);

enum class FinishReason { Stop, Length, Error };

struct ChatResponse {
    std::string content;
    FinishReason finish_reason = FinishReason::Stop;
};

/// Receives streamed fragments in order. `on_error` is the terminal marker sent
/// when a stream dies part way.
struct StreamSink {
    std::function<void(std::string_view)> on_fragment;
    std::function<void(const GatewayError&)> on_error;
};

using Embedding = std::vector<double>;

class Gateway {
public:
    virtual ~Gateway() = default;

    virtual ChatResponse complete(const ChatRequest& request) const = 0;
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) const = 0;
    virtual ChatResponse stream_complete(const ChatRequest& request, const StreamSink& sink) const = 0;
};

struct MockRule {
    // Every pattern must occur in the last user message.
    std::vector<std::string> patterns;
    std::string response;
};

struct MockScript {
    std::vector<MockRule> rules;
    std::string default_response;
    std::int64_t seed = 0;

    static MockScript from_json_text(std::string_view text);  // throws SchemaError
    static MockScript load(const std::string& path);          // throws IoError / SchemaError
};

inline constexpr std::size_t kMockEmbeddingDim = 64;

/// Deterministic backend. A response is a pure function of (script, request).
///
/// Responses may contain `{{target_code}}`, which expands to the body of the
/// first fenced code block in the last user message.
class MockGateway final : public Gateway {
public:
    explicit MockGateway(MockScript script) : script_(std::move(script)) {}

    ChatResponse complete(const ChatRequest& request) const override;
    std::vector<Embedding> embed(const std::vector<std::string>& texts) const override;
    ChatResponse stream_complete(const ChatRequest& request, const StreamSink& sink) const override;

    const MockScript& script() const noexcept { return script_; }

private:
    MockScript script_;
};

/// Normalized character-trigram frequency hash into 64 dimensions.
Embedding trigram_embedding(std::string_view text);

/// Splits after each whitespace run: "a b c" -> {"a ", "b ", "c"}.
std::vector<std::string> split_stream_fragments(std::string_view content);

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

struct RemoteConfig {
    std::string base_url;
    std::string api_key;
    std::string model = "gpt-3.5-turbo";
    std::string embedding_model = "text-embedding-ada-002";
    RetryPolicy retry;
    std::chrono::seconds timeout{120};

    /// Reads SPROUT_API_BASE, SPROUT_API_KEY and optionally SPROUT_MODEL.
    static RemoteConfig from_env();
};

/// OpenAI-compatible chat/embedding client.
class RemoteGateway final : public Gateway {
public:
    explicit RemoteGateway(RemoteConfig config);

    ChatResponse complete(const ChatRequest& request) const override;
    std::vector<Embedding> embed(const std::vector<std::string>& texts) const override;
    ChatResponse stream_complete(const ChatRequest& request, const StreamSink& sink) const override;

private:
    RemoteConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

}  // namespace sprout::llm
