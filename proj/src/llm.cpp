#include "sprout/llm.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace sprout::llm {

using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

void validate(const ChatRequest& request) {
    if (request.messages.empty()) {
        throw Error(ErrorCode::InvalidArgument, "chat request has no messages");
    }
    if (request.messages.front().role != Role::System) {
        throw Error(ErrorCode::InvalidArgument, "first message must be the system prompt");
    }
    if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
        throw Error(ErrorCode::InvalidArgument, "temperature must lie in [0, 2]");
    }
    if (request.max_tokens <= 0) {
        throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
    }
}

std::string_view last_user_message(const ChatRequest& request) {
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == Role::User) return it->content;
    }
    return {};
}

// ---------------------------------------------------------------------------
// Mock backend

MockScript MockScript::from_json_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("mock script is not JSON: ") + e.what(), "/");
    }
    if (!doc.is_object()) throw Error(ErrorCode::SchemaError, "mock script must be an object", "/");

    MockScript script;
    script.default_response = doc.value("default_response", std::string{});
    script.seed = doc.value("seed", std::int64_t{0});
    const auto rules = doc.value("rules", json::array());
    if (!rules.is_array()) throw Error(ErrorCode::SchemaError, "rules must be an array", "/rules");
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const auto& r = rules[i];
        const std::string where = "/rules/" + std::to_string(i);
        if (!r.is_object() || !r.contains("match") || !r.contains("response") ||
            !r["response"].is_string()) {
            throw Error(ErrorCode::SchemaError, "rule needs match and response", where);
        }
        MockRule rule;
        rule.response = r["response"].get<std::string>();
        if (r["match"].is_string()) {
            rule.patterns.push_back(r["match"].get<std::string>());
        } else if (r["match"].is_array()) {
            for (const auto& p : r["match"]) {
                if (!p.is_string()) throw Error(ErrorCode::SchemaError, "match entries must be strings", where);
                rule.patterns.push_back(p.get<std::string>());
            }
        } else {
            throw Error(ErrorCode::SchemaError, "match must be a string or array", where);
        }
        script.rules.push_back(std::move(rule));
    }
    return script;
}

MockScript MockScript::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read mock script " + path, path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

namespace {

std::string first_fenced_block(std::string_view text) {
    auto open = text.find("```");
    if (open == std::string_view::npos) return {};
    auto body = text.find('\n', open);
    if (body == std::string_view::npos) return {};
    ++body;
    auto close = text.find("\n```", body - 1);
    if (close == std::string_view::npos || close < body - 1) return {};
    if (close + 1 == body) return {};  // empty block
    return std::string(text.substr(body, close - body));
}

std::string expand_placeholders(const std::string& response, std::string_view user_message) {
    static constexpr std::string_view kTarget = "{{target_code}}";
    auto pos = response.find(kTarget);
    if (pos == std::string::npos) return response;
    const std::string code = first_fenced_block(user_message);
    std::string out = response;
    while (pos != std::string::npos) {
        out.replace(pos, kTarget.size(), code);
        pos = out.find(kTarget, pos + code.size());
    }
    return out;
}

std::uint32_t fnv1a(std::string_view bytes) {
    std::uint32_t hash = 2166136261u;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 16777619u;
    }
    return hash;
}

}  // namespace

ChatResponse MockGateway::complete(const ChatRequest& request) const {
    validate(request);
    const std::string_view message = last_user_message(request);
    for (const auto& rule : script_.rules) {
        bool all = !rule.patterns.empty();
        for (const auto& pattern : rule.patterns) {
            if (message.find(pattern) == std::string_view::npos) {
                all = false;
                break;
            }
        }
        if (all) return {expand_placeholders(rule.response, message), FinishReason::Stop};
    }
    return {expand_placeholders(script_.default_response, message), FinishReason::Stop};
}

Embedding trigram_embedding(std::string_view text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (char c : text) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

    Embedding v(kMockEmbeddingDim, 0.0);
    if (lowered.size() < 3) {
        v[fnv1a(lowered) % kMockEmbeddingDim] += 1.0;
    } else {
        for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) {
            v[fnv1a(std::string_view(lowered).substr(i, 3)) % kMockEmbeddingDim] += 1.0;
        }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

std::vector<Embedding> MockGateway::embed(const std::vector<std::string>& texts) const {
    if (texts.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to embed");
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        if (text.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");
        out.push_back(trigram_embedding(text));
    }
    return out;
}

std::vector<std::string> split_stream_fragments(std::string_view content) {
    std::vector<std::string> out;
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < content.size()) {
        if (std::isspace(static_cast<unsigned char>(content[i]))) {
            while (i < content.size() && std::isspace(static_cast<unsigned char>(content[i]))) ++i;
            out.emplace_back(content.substr(start, i - start));
            start = i;
        } else {
            ++i;
        }
    }
    if (start < content.size()) out.emplace_back(content.substr(start));
    return out;
}

ChatResponse MockGateway::stream_complete(const ChatRequest& request, const StreamSink& sink) const {
    ChatResponse response = complete(request);
    for (const auto& fragment : split_stream_fragments(response.content)) {
        if (sink.on_fragment) sink.on_fragment(fragment);
    }
    return response;
}

// ---------------------------------------------------------------------------
// Remote backend

RemoteConfig RemoteConfig::from_env() {
    RemoteConfig config;
    if (const char* base = std::getenv("SPROUT_API_BASE")) config.base_url = base;
    if (config.base_url.empty()) config.base_url = "https://api.openai.com/v1";
    if (const char* key = std::getenv("SPROUT_API_KEY")) config.api_key = key;
    if (const char* model = std::getenv("SPROUT_MODEL")) config.model = model;
    return config;
}

RemoteGateway::RemoteGateway(RemoteConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.base_url.find("://");
    const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_begin = config_.base_url.find('/', host_begin);
    if (path_begin == std::string::npos) {
        scheme_host_port_ = config_.base_url;
    } else {
        scheme_host_port_ = config_.base_url.substr(0, path_begin);
        path_prefix_ = config_.base_url.substr(path_begin);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

namespace {

struct AttemptFailure {
    ErrorCode code = ErrorCode::Transport;
    std::string message;
    bool retriable = true;
};

json request_body(const ChatRequest& request, const std::string& model, bool stream) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    json body = {{"model", model},
                 {"messages", messages},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}};
    if (request.seed) body["seed"] = *request.seed;
    if (stream) body["stream"] = true;
    return body;
}

// False for non-2xx statuses, with `failure` describing whether to retry.
bool status_ok(int status, AttemptFailure& failure) {
    if (status >= 200 && status < 300) return true;
    if (status == 401 || status == 403) {
        failure = {ErrorCode::Unauthorized, "credential rejected (HTTP " + std::to_string(status) + ")", false};
    } else if (status == 429) {
        failure = {ErrorCode::RateLimited, "rate limited (HTTP 429)", true};
    } else {
        failure = {ErrorCode::Transport, "HTTP " + std::to_string(status), status >= 500};
    }
    return false;
}

AttemptFailure transport_failure(httplib::Error err) {
    return {ErrorCode::Transport, "transport failure: " + httplib::to_string(err), true};
}

FinishReason parse_finish(const json& choice) {
    const auto reason = choice.value("finish_reason", json());
    if (reason.is_string() && reason.get<std::string>() == "length") return FinishReason::Length;
    return FinishReason::Stop;
}

// Runs `attempt` until it yields a value; sleeps 0.5s, 1s, 2s... between tries.
template <typename Attempt>
auto with_retries(const RetryPolicy& policy, Attempt&& attempt) {
    AttemptFailure failure;
    for (int n = 1;; ++n) {
        auto result = attempt(failure);
        if (result) return std::move(*result);
        if (!failure.retriable || n >= policy.max_attempts) {
            throw GatewayError(failure.code, failure.message, n);
        }
        std::this_thread::sleep_for(policy.initial_backoff * (1 << (n - 1)));
    }
}

}  // namespace

ChatResponse RemoteGateway::complete(const ChatRequest& request) const {
    validate(request);
    const std::string body = request_body(request, config_.model, false).dump();
    return with_retries(config_.retry, [&](AttemptFailure& failure) -> std::optional<ChatResponse> {
        httplib::Client client(scheme_host_port_);
        client.set_read_timeout(config_.timeout);
        httplib::Headers headers{{"Authorization", "Bearer " + config_.api_key}};
        auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
        if (!res) {
            failure = transport_failure(res.error());
            return std::nullopt;
        }
        if (!status_ok(res->status, failure)) return std::nullopt;
        try {
            const auto doc = json::parse(res->body);
            const auto& choice = doc.at("choices").at(0);
            return ChatResponse{choice.at("message").at("content").get<std::string>(), parse_finish(choice)};
        } catch (const json::exception& e) {
            failure = {ErrorCode::Transport, std::string("malformed completion body: ") + e.what(), true};
            return std::nullopt;
        }
    });
}

std::vector<Embedding> RemoteGateway::embed(const std::vector<std::string>& texts) const {
    if (texts.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to embed");
    for (const auto& t : texts) {
        if (t.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");
    }
    const std::string body = json{{"model", config_.embedding_model}, {"input", texts}}.dump();
    return with_retries(config_.retry, [&](AttemptFailure& failure) -> std::optional<std::vector<Embedding>> {
        httplib::Client client(scheme_host_port_);
        client.set_read_timeout(config_.timeout);
        httplib::Headers headers{{"Authorization", "Bearer " + config_.api_key}};
        auto res = client.Post(path_prefix_ + "/embeddings", headers, body, "application/json");
        if (!res) {
            failure = transport_failure(res.error());
            return std::nullopt;
        }
        if (!status_ok(res->status, failure)) return std::nullopt;
        try {
            const auto doc = json::parse(res->body);
            const auto& data = doc.at("data");
            std::vector<Embedding> out(texts.size());
            for (std::size_t i = 0; i < data.size(); ++i) {
                const std::size_t index = data[i].value("index", i);
                if (index >= out.size()) throw std::out_of_range("embedding index");
                out[index] = data[i].at("embedding").get<Embedding>();
            }
            for (const auto& e : out) {
                if (e.empty() || e.size() != out.front().size()) throw std::out_of_range("embedding size");
            }
            return out;
        } catch (const std::exception& e) {
            failure = {ErrorCode::Transport, std::string("malformed embedding body: ") + e.what(), true};
            return std::nullopt;
        }
    });
}

ChatResponse RemoteGateway::stream_complete(const ChatRequest& request, const StreamSink& sink) const {
    validate(request);
    const std::string body = request_body(request, config_.model, true).dump();
    std::size_t delivered = 0;
    try {
        return with_retries(config_.retry, [&](AttemptFailure& failure) -> std::optional<ChatResponse> {
            httplib::Client client(scheme_host_port_);
            client.set_read_timeout(config_.timeout);

            int status = 0;
            std::string error_body;
            std::string pending;
            std::string content;
            FinishReason finish = FinishReason::Stop;
            bool done = false;

            httplib::Request req;
            req.method = "POST";
            req.path = path_prefix_ + "/chat/completions";
            req.headers = {{"Authorization", "Bearer " + config_.api_key}, {"Accept", "text/event-stream"}};
            req.body = body;
            req.set_header("Content-Type", "application/json");
            req.response_handler = [&](const httplib::Response& r) {
                status = r.status;
                return true;
            };
            req.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
                if (status != 200) {
                    error_body.append(data, len);
                    return true;
                }
                pending.append(data, len);
                std::size_t eol;
                while ((eol = pending.find('\n')) != std::string::npos) {
                    std::string line = pending.substr(0, eol);
                    pending.erase(0, eol + 1);
                    if (!line.empty() && line.back() == '\r') line.pop_back();
                    if (line.rfind("data:", 0) != 0) continue;
                    std::string payload = line.substr(5);
                    if (!payload.empty() && payload.front() == ' ') payload.erase(0, 1);
                    if (payload == "[DONE]") {
                        done = true;
                        continue;
                    }
                    try {
                        const auto chunk = json::parse(payload);
                        const auto& choice = chunk.at("choices").at(0);
                        const auto delta = choice.value("delta", json::object());
                        if (delta.contains("content") && delta["content"].is_string()) {
                            const auto piece = delta["content"].get<std::string>();
                            if (!piece.empty()) {
                                content += piece;
                                ++delivered;
                                if (sink.on_fragment) sink.on_fragment(piece);
                            }
                        }
                        if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
                            finish = parse_finish(choice);
                        }
                    } catch (const json::exception&) {
                        return false;
                    }
                }
                return true;
            };

            httplib::Response res;
            httplib::Error err = httplib::Error::Success;
            const bool ok = client.send(req, res, err);
            if (status != 0 && !status_ok(status, failure)) return std::nullopt;
            if (ok && done) return ChatResponse{content, finish};
            failure = ok ? AttemptFailure{ErrorCode::Transport, "stream ended before completion", true}
                         : transport_failure(err);
            // Fragments already reached the sink; retrying would duplicate them.
            if (delivered > 0) failure.retriable = false;
            return std::nullopt;
        });
    } catch (const GatewayError& e) {
        if (sink.on_error) sink.on_error(e);
        throw;
    }
}

}  // namespace sprout::llm
