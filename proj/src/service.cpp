#include "sprout/service.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <stop_token>
#include <thread>

#include <httplib.h>

#include "sprout/engine.hpp"
#include "sprout/error.hpp"
#include "sprout/node_space.hpp"
#include "sprout/serialize.hpp"
#include "sprout/store.hpp"
#include "sprout/tree_ops.hpp"

namespace sprout::service {

using nlohmann::json;

namespace {

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Conflict: return 409;
        case ErrorCode::Unauthorized:
        case ErrorCode::RateLimited:
        case ErrorCode::Transport:
        case ErrorCode::UnparseableResponse:
        case ErrorCode::ModelReturnedSingleParagraph:
        case ErrorCode::EmptyRewrite: return 502;
        case ErrorCode::IoError:
        case ErrorCode::BindError: return 500;
        default: return 400;
    }
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
    send_json(res, http_status(e.code()),
              {{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"detail", e.detail()}});
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object", "body");
    }
    return body;
}

std::string require_string(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw Error(ErrorCode::InvalidArgument, std::string("missing field ") + key, key);
    }
    return it->get<std::string>();
}

int require_int(const json& body, std::initializer_list<const char*> keys) {
    for (const char* key : keys) {
        auto it = body.find(key);
        if (it != body.end() && it->is_number_integer()) return it->get<int>();
    }
    throw Error(ErrorCode::InvalidArgument, std::string("missing field ") + *keys.begin(), *keys.begin());
}

std::string sse_frame(std::uint64_t seq, EventKind kind, const json& payload) {
    return "id: " + std::to_string(seq) + "\nevent: " + std::string(to_string(kind)) + "\ndata: " + payload.dump() +
           "\n\n";
}

json choice_json(const tree_ops::Choice& c) {
    return {{"id", c.id},
            {"kind", c.expanded ? "node" : "stub"},
            {"action", std::string(to_string(c.action))},
            {"target", c.target ? json(*c.target) : json(nullptr)},
            {"votes", c.votes},
            {"reason", c.reason}};
}

json layout_json(const node_space::Layout& layout, const std::string& projector) {
    json points = json::array();
    for (const auto& p : layout.points) {
        points.push_back({{"node_id", p.node_id},
                          {"x", p.position[0]},
                          {"y", p.position[1]},
                          {"intent", p.intent},
                          {"origin", std::string(to_string(p.origin))},
                          {"on_active_chain", p.on_active_chain}});
    }
    return {{"points", points}, {"stale", layout.stale}, {"projector", projector}};
}

struct Session {
    std::mutex writer;  // one mutation at a time
    std::mutex state;   // guards everything below
    std::condition_variable changed;
    Project project;
    std::vector<std::pair<std::uint64_t, Event>> log;
    std::uint64_t last_seq = 0;
    bool running = false;
    std::stop_source stop;
    std::thread worker;
    std::optional<node_space::Layout> layout;

    void publish_locked(Event event) {
        log.emplace_back(++last_seq, std::move(event));
        changed.notify_all();
    }
};

struct Cached {
    int status = 200;
    std::string body;
    std::string content_type;
};

}  // namespace

void parse_bind(const std::string& bind, ServiceConfig& config) {
    const auto colon = bind.rfind(':');
    const std::string host = colon == std::string::npos ? std::string() : bind.substr(0, colon);
    const std::string port = colon == std::string::npos ? bind : bind.substr(colon + 1);
    try {
        std::size_t used = 0;
        const int value = std::stoi(port, &used);
        if (used != port.size() || value < 0 || value > 65535) throw std::invalid_argument(port);
        config.port = value;
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "bad bind address " + bind, bind);
    }
    if (!host.empty()) config.host = host;
}

struct Service::Impl {
    ServiceConfig config;
    prompts::PromptTemplateSet templates;
    httplib::Server server;
    std::mutex sessions_mu;
    std::map<std::string, std::shared_ptr<Session>> sessions;
    std::mutex idempotent_mu;
    std::map<std::string, Cached> idempotent;
    std::atomic<bool> shutting_down{false};
    std::thread listener;
    int bound_port = -1;

    explicit Impl(ServiceConfig c) : config(std::move(c)) {
        if (!config.gateway) throw Error(ErrorCode::InvalidArgument, "service needs a gateway", "gateway");
        templates = config.templates_dir.empty() ? prompts::PromptTemplateSet::defaults()
                                                 : prompts::PromptTemplateSet::load_dir(config.templates_dir);
        server.new_task_queue = [] { return new httplib::ThreadPool(32); };
        // httplib also sets SO_REUSEPORT, which would let a second server share a busy port.
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
        });
        routes();
    }

    engine::Engine engine_for(const Project& project) const {
        engine::EngineConfig cfg;
        cfg.seed = project.seed;
        return engine::Engine(*config.gateway, templates, cfg);
    }

    std::shared_ptr<Session> session(const std::string& id) {
        std::lock_guard lock(sessions_mu);
        auto it = sessions.find(id);
        if (it == sessions.end()) throw Error(ErrorCode::NotFound, "no project " + id, id);
        return it->second;
    }

    Project snapshot(Session& s) {
        std::lock_guard lock(s.state);
        return s.project;
    }

    // Runs `op` on a copy and commits it with the events it produced.
    template <typename Op>
    json mutate(Session& s, Op op) {
        std::lock_guard writer(s.writer);
        Project work;
        {
            std::lock_guard lock(s.state);
            if (s.running) throw Error(ErrorCode::Conflict, "autopilot is running on this project", s.project.id);
            work = s.project;
        }
        std::vector<Event> events;
        json result = op(work, events);
        std::lock_guard lock(s.state);
        s.project = std::move(work);
        for (auto& e : events) s.publish_locked(std::move(e));
        return result;
    }

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    Handler guarded(Handler handler, bool idempotent_method) {
        return [this, handler, idempotent_method](const httplib::Request& req, httplib::Response& res) {
            std::string key;
            if (idempotent_method && req.has_header("Idempotency-Key")) {
                key = req.method + " " + req.path + " " + req.get_header_value("Idempotency-Key");
                std::lock_guard lock(idempotent_mu);
                if (auto it = idempotent.find(key); it != idempotent.end()) {
                    res.status = it->second.status;
                    res.set_content(it->second.body, it->second.content_type);
                    return;
                }
            }
            try {
                handler(req, res);
            } catch (const Error& e) {
                send_error(res, e);
            } catch (const json::exception& e) {
                send_error(res, Error(ErrorCode::InvalidArgument, e.what(), "body"));
            } catch (const std::exception& e) {
                send_json(res, 500, {{"code", "Internal"}, {"message", e.what()}, {"detail", ""}});
            }
            if (!key.empty()) {
                std::lock_guard lock(idempotent_mu);
                idempotent.emplace(key, Cached{res.status, res.body, res.get_header_value("Content-Type")});
            }
        };
    }

    void post(const std::string& pattern, Handler h) { server.Post(pattern, guarded(std::move(h), true)); }
    void put(const std::string& pattern, Handler h) { server.Put(pattern, guarded(std::move(h), true)); }
    void get(const std::string& pattern, Handler h) { server.Get(pattern, guarded(std::move(h), false)); }

    void routes();
    void start_autopilot(const std::shared_ptr<Session>& s, const engine::GenerationBudget& budget);
    void stream_events(const std::shared_ptr<Session>& s, httplib::Response& res);
    void shutdown();
};

void Service::Impl::routes() {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

    post("/projects", [this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const json source = body.value("source", json::object());
        if (!source.is_object()) throw Error(ErrorCode::InvalidArgument, "source must be an object", "source");
        SourceDocument doc(source.value("language_tag", std::string("text")), source.value("text", std::string()));
        const std::int64_t seed = body.value("seed", config.default_seed);
        auto s = std::make_shared<Session>();
        {
            std::lock_guard lock(sessions_mu);
            std::string id = derive_project_id(seed, doc);
            for (int n = 2; sessions.count(id); ++n) id = derive_project_id(seed, doc) + "-" + std::to_string(n);
            s->project = Project::create(id, doc, seed);
            if (auto cfg = body.find("config"); cfg != body.end() && cfg->is_object()) {
                for (const auto& [k, v] : cfg->items()) {
                    if (v.is_string()) s->project.config[k] = v.get<std::string>();
                }
            }
            sessions.emplace(id, s);
        }
        send_json(res, 201, Json(snapshot(*s)));
    });

    get(R"(/projects/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, Json(snapshot(*session(req.matches[1]))));
    });

    put(R"(/projects/([^/]+)/source)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const json body = parse_body(req);
        SourceDocument doc(body.value("language_tag", std::string("text")), require_string(body, "text"));
        const json out = mutate(*s, [&](Project& work, std::vector<Event>&) {
            if (work.tree.nodes.size() > 1) {
                throw Error(ErrorCode::Conflict, "anchors cite the current source; it can no longer change", work.id);
            }
            work.source = doc;
            work.embeddings.clear();
            return Json(work);
        });
        send_json(res, 200, out);
    });

    post(R"(/projects/([^/]+)/autopilot)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const json body = parse_body(req);
        engine::GenerationBudget budget;
        budget.max_steps = body.value("max_steps", budget.max_steps);
        budget.k = body.value("k", budget.k);
        budget.v = body.value("v", budget.v);
        budget.validate();
        start_autopilot(s, budget);
        send_json(res, 202, {{"status", "started"}, {"max_steps", budget.max_steps}, {"k", budget.k}, {"v", budget.v}});
    });

    post(R"(/projects/([^/]+)/pause)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        std::lock_guard lock(s->state);
        if (s->running) s->stop.request_stop();
        send_json(res, s->running ? 202 : 200, {{"pausing", s->running}});
    });

    post(R"(/projects/([^/]+)/generate-for-selection)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const json body = parse_body(req);
        const CodeRange range{require_int(body, {"start", "start_line"}), require_int(body, {"end", "end_line"})};
        const json out = mutate(*s, [&](Project& work, std::vector<Event>& events) {
            const NodeId id = engine_for(work).generate_for_selection(work, range);
            const auto& node = work.tree.node(id);
            const int step = static_cast<int>(work.active_chain.size()) - 1;
            events.push_back({EventKind::NodeCreated, engine::node_payload(step, node)});
            if (node.anchor) events.push_back({EventKind::AnchorResolved, engine::anchor_payload(step, node)});
            events.push_back({EventKind::ChainChanged, engine::chain_payload(work.active_chain)});
            return json{{"node", node}, {"chain", work.active_chain}};
        });
        send_json(res, 201, out);
    });

    auto fork_events = [](const Project& work, const tree_ops::BranchFork& fork, std::vector<Event>& events) {
        for (const auto* list : {&fork.new_nodes, &fork.copied_suffix}) {
            for (const auto& id : *list) {
                events.push_back({EventKind::NodeCreated, engine::node_payload(0, work.tree.node(id))});
            }
        }
        events.push_back({EventKind::ChainChanged, engine::chain_payload(work.active_chain)});
        return json{{"fork_parent", fork.fork_parent},
                    {"new_nodes", fork.new_nodes},
                    {"copied_suffix", fork.copied_suffix},
                    {"chain", work.active_chain}};
    };

    post(R"(/projects/([^/]+)/nodes/group)", [this, fork_events](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const json body = parse_body(req);
        std::vector<NodeId> ids;
        for (const auto& v : body.at("node_ids")) ids.emplace_back(v.get<std::string>());
        send_json(res, 201, mutate(*s, [&](Project& work, std::vector<Event>& events) {
                      return fork_events(work, tree_ops::group_nodes(work, ids, engine_for(work)), events);
                  }));
    });

    post(R"(/projects/([^/]+)/nodes/split)", [this, fork_events](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const NodeId id(require_string(parse_body(req), "node_id"));
        send_json(res, 201, mutate(*s, [&](Project& work, std::vector<Event>& events) {
                      return fork_events(work, tree_ops::split_node(work, id, engine_for(work)), events);
                  }));
    });

    post(R"(/projects/([^/]+)/nodes/trim)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const NodeId id(require_string(parse_body(req), "node_id"));
        send_json(res, 200, mutate(*s, [&](Project& work, std::vector<Event>& events) {
                      const std::size_t removed = tree_ops::trim_node(work, id);
                      events.push_back({EventKind::ChainChanged, engine::chain_payload(work.active_chain)});
                      return json{{"removed", removed}, {"chain", work.active_chain}};
                  }));
    });

    post(R"(/projects/([^/]+)/chain/assemble)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const NodeId id(require_string(parse_body(req), "node_id"));
        send_json(res, 200, mutate(*s, [&](Project& work, std::vector<Event>& events) {
                      const Chain chain = tree_ops::assemble_quick(
                          work, id, [&](const Event& e) { events.push_back(e); });
                      return json{{"chain", chain}};
                  }));
    });

    get(R"(/projects/([^/]+)/choices/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const Project project = snapshot(*session(req.matches[1]));
        int top_k = 3;
        if (req.has_param("top_k")) top_k = std::stoi(req.get_param_value("top_k"));
        json out = json::array();
        for (const auto& c : tree_ops::enumerate_choices(project, NodeId(req.matches[2]), top_k)) {
            out.push_back(choice_json(c));
        }
        send_json(res, 200, {{"node_id", std::string(req.matches[2])}, {"choices", out}});
    });

    post(R"(/projects/([^/]+)/chain/extend)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const json body = parse_body(req);
        const NodeId from(require_string(body, "node_id"));
        const NodeId choice(require_string(body, "choice"));
        send_json(res, 200, mutate(*s, [&](Project& work, std::vector<Event>& events) {
                      const bool existing = work.tree.contains(choice);
                      const NodeId tail = tree_ops::extend_step(work, from, choice, engine_for(work));
                      if (!existing && tail != from) {
                          events.push_back({EventKind::NodeCreated, engine::node_payload(0, work.tree.node(tail))});
                      }
                      events.push_back({EventKind::ChainChanged, engine::chain_payload(work.active_chain)});
                      return json{{"node_id", tail}, {"chain", work.active_chain}};
                  }));
    });

    get(R"(/projects/([^/]+)/node-space)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        std::lock_guard writer(s->writer);
        Project work;
        std::optional<node_space::Layout> previous;
        {
            std::lock_guard lock(s->state);
            work = s->project;
            previous = s->layout;
        }
        auto projector = node_space::projector_for(work);
        const auto layout =
            node_space::refresh_points(work, *config.gateway, *projector, previous ? &*previous : nullptr);
        {
            std::lock_guard lock(s->state);
            if (!s->running) s->project.embeddings = work.embeddings;
            s->layout = layout;
        }
        send_json(res, 200, layout_json(layout, projector->name()));
    });

    post(R"(/projects/([^/]+)/nodes/([^/]+)/refine)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const NodeId id(req.matches[2]);
        const json body = parse_body(req);
        node_space::RefineSpec spec;
        if (body.contains("style") && !body["style"].is_null()) spec.style = body["style"].get<std::string>();
        if (body.contains("prompt") && !body["prompt"].is_null()) spec.custom_prompt = body["prompt"].get<std::string>();
        if (body.contains("detail") && !body["detail"].is_null()) {
            const auto detail = body["detail"].get<std::string>();
            if (detail == "shorter") spec.detail = prompts::DetailDirection::Shorter;
            else if (detail == "longer") spec.detail = prompts::DetailDirection::Longer;
            else throw Error(ErrorCode::InvalidArgument, "detail must be shorter or longer", "detail");
        }
        send_json(res, 201, mutate(*s, [&](Project& work, std::vector<Event>& events) {
                      const bool on_chain = work.active_chain.contains(id);
                      const NodeId fresh = node_space::refine_node(work, id, spec, engine_for(work));
                      events.push_back({EventKind::NodeCreated, engine::node_payload(0, work.tree.node(fresh))});
                      if (on_chain) events.push_back({EventKind::ChainChanged, engine::chain_payload(work.active_chain)});
                      return json{{"node_id", fresh}, {"chain", work.active_chain}};
                  }));
    });

    post(R"(/projects/([^/]+)/nodes/([^/]+)/adopt)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const NodeId id(req.matches[2]);
        const NodeId alt(require_string(parse_body(req), "alternative_id"));
        send_json(res, 200, mutate(*s, [&](Project& work, std::vector<Event>& events) {
                      const Chain chain = node_space::adopt_alternative(work, id, alt);
                      events.push_back({EventKind::ChainChanged, engine::chain_payload(chain)});
                      return json{{"chain", chain}};
                  }));
    });

    get(R"(/projects/([^/]+)/export\.md)", [this](const httplib::Request& req, httplib::Response& res) {
        res.set_content(store::export_markdown(snapshot(*session(req.matches[1]))), "text/markdown; charset=utf-8");
    });

    get(R"(/projects/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
        stream_events(session(req.matches[1]), res);
    });
}

void Service::Impl::start_autopilot(const std::shared_ptr<Session>& s, const engine::GenerationBudget& budget) {
    std::lock_guard writer(s->writer);
    std::lock_guard lock(s->state);
    if (s->running) throw Error(ErrorCode::Conflict, "autopilot already running", s->project.id);
    if (s->worker.joinable()) s->worker.join();  // a finished run
    s->running = true;
    s->stop = std::stop_source();
    s->worker = std::thread([this, s, budget, work = s->project, token = s->stop.get_token()]() mutable {
        const engine::Engine engine = engine_for(work);
        auto sink = [&](const Event& e) {
            std::lock_guard lock(s->state);
            s->project = work;
            s->publish_locked(e);
        };
        try {
            engine.run_autopilot(work, budget, sink, token);
        } catch (const std::exception&) {
            // Reported through the Error event; the project stays at its last valid state.
        }
        std::lock_guard lock(s->state);
        s->project = work;
        s->running = false;
        s->changed.notify_all();
    });
}

void Service::Impl::stream_events(const std::shared_ptr<Session>& s, httplib::Response& res) {
    res.set_header("Cache-Control", "no-cache");
    auto cursor = std::make_shared<std::optional<std::uint64_t>>();
    auto idle = std::make_shared<int>(0);
    res.set_chunked_content_provider(
        "text/event-stream", [this, s, cursor, idle](std::size_t, httplib::DataSink& sink) {
            std::string frames;
            {
                std::unique_lock lock(s->state);
                if (!*cursor) {
                    // Late subscribers start from a full snapshot.
                    *cursor = s->last_seq;
                    frames = sse_frame(s->last_seq, EventKind::Snapshot,
                                       {{"seq", s->last_seq}, {"project", Json(s->project)}});
                } else {
                    s->changed.wait_for(lock, std::chrono::milliseconds(200),
                                        [&] { return s->last_seq > **cursor || shutting_down.load(); });
                    if (shutting_down) {
                        sink.done();
                        return true;
                    }
                    for (auto i = **cursor; i < s->last_seq; ++i) {
                        const auto& [seq, event] = s->log[i];
                        frames += sse_frame(seq, event.kind, event.payload);
                    }
                    *cursor = s->last_seq;
                }
            }
            if (frames.empty()) {
                if (++*idle < 25) return true;
                frames = ": keep-alive\n\n";
            }
            *idle = 0;
            return sink.write(frames.data(), frames.size());
        });
}

void Service::Impl::shutdown() {
    shutting_down = true;
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(sessions_mu);
        for (auto& [_, s] : sessions) all.push_back(s);
    }
    for (auto& s : all) {
        {
            std::lock_guard lock(s->state);
            s->stop.request_stop();
            s->changed.notify_all();
        }
        if (s->worker.joinable()) s->worker.join();
    }
    server.stop();
    if (listener.joinable()) listener.join();
}

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() {
    try {
        stop();
    } catch (...) {
    }
}

int Service::bind() {
    if (impl_->bound_port >= 0) return impl_->bound_port;
    const auto& c = impl_->config;
    if (c.port == 0) {
        impl_->bound_port = impl_->server.bind_to_any_port(c.host);
        if (impl_->bound_port < 0) impl_->bound_port = -1;
    } else if (impl_->server.bind_to_port(c.host, c.port)) {
        impl_->bound_port = c.port;
    }
    if (impl_->bound_port < 0) {
        throw Error(ErrorCode::BindError, "cannot bind " + c.host + ":" + std::to_string(c.port),
                    c.host + ":" + std::to_string(c.port));
    }
    return impl_->bound_port;
}

void Service::listen() {
    bind();
    impl_->server.listen_after_bind();
}

void Service::start() {
    bind();
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void Service::stop() {
    if (impl_) impl_->shutdown();
}

int Service::port() const { return impl_->bound_port; }

}  // namespace sprout::service
