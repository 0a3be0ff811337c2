// sprout: command-line entry point for generation, export, evaluation,
// replay and the HTTP service.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sprout/engine.hpp"
#include "sprout/error.hpp"
#include "sprout/eval.hpp"
#include "sprout/llm.hpp"
#include "sprout/serialize.hpp"
#include "sprout/service.hpp"
#include "sprout/store.hpp"

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw sprout::Error(sprout::ErrorCode::IoError, "cannot open " + path, path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::shared_ptr<const sprout::llm::Gateway> make_gateway(const std::string& mock_path) {
    if (!mock_path.empty()) {
        return std::make_shared<sprout::llm::MockGateway>(sprout::llm::MockScript::load(mock_path));
    }
    return std::make_shared<sprout::llm::RemoteGateway>(sprout::llm::RemoteConfig::from_env());
}

sprout::prompts::PromptTemplateSet load_templates(const std::string& dir) {
    return dir.empty() ? sprout::prompts::PromptTemplateSet::defaults()
                       : sprout::prompts::PromptTemplateSet::load_dir(dir);
}

std::string event_line(std::uint64_t seq, const sprout::Event& event) {
    return nlohmann::json{{"seq", seq}, {"kind", std::string(sprout::to_string(event.kind))}, {"payload", event.payload}}
        .dump();
}

std::unique_ptr<sprout::service::Service> g_service;

void on_signal(int) {
    // listen() returns once stop() runs; do it off the signal context.
    std::thread([] {
        if (g_service) g_service->stop();
    }).detach();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sprout: tutorial authoring engine"};
    app.require_subcommand(1);

    std::string mock;
    std::string templates;
    std::int64_t seed = 0;

    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    std::string bind = "127.0.0.1:8080";
    serve->add_option("--bind", bind, "Listen address, host:port");
    serve->add_option("--templates", templates, "Prompt template directory");
    serve->add_option("--mock", mock, "Mock LLM script (JSON)");
    serve->add_option("--seed", seed, "Default project seed");

    auto* generate = app.add_subcommand("generate", "Generate a tutorial with the autopilot");
    std::string source_path;
    std::string lang;
    std::string out_path;
    sprout::engine::GenerationBudget budget;
    generate->add_option("--source", source_path, "Source file")->required();
    generate->add_option("--lang", lang, "Language tag, e.g. python")->required();
    generate->add_option("--out", out_path, "Project file to write")->required();
    generate->add_option("--mock", mock, "Mock LLM script (JSON)");
    generate->add_option("--max-steps", budget.max_steps, "Step budget")->check(CLI::PositiveNumber);
    generate->add_option("--k", budget.k, "Candidate thoughts per step")->check(CLI::PositiveNumber);
    generate->add_option("--v", budget.v, "Votes per step")->check(CLI::PositiveNumber);
    generate->add_option("--seed", seed, "Seed");
    generate->add_option("--templates", templates, "Prompt template directory");

    auto* export_cmd = app.add_subcommand("export", "Export the active chain as Markdown");
    std::string project_path;
    std::string md_path;
    export_cmd->add_option("--project", project_path, "Project file")->required();
    export_cmd->add_option("--out", md_path, "Markdown file to write")->required();

    auto* eval = app.add_subcommand("eval", "Score text-code anchors over a labeled corpus");
    std::string corpus_path;
    std::string report_path;
    int jobs = 1;
    eval->add_option("--corpus", corpus_path, "Corpus directory or file")->required();
    eval->add_option("--mock", mock, "Mock LLM script (JSON)");
    eval->add_option("--jobs", jobs, "Entries evaluated in parallel")->check(CLI::PositiveNumber);
    eval->add_option("--out", report_path, "Write the report here instead of stdout");
    eval->add_option("--seed", seed, "Seed");

    auto* replay = app.add_subcommand("replay", "Re-print the recorded agent steps as events");
    replay->add_option("--project", project_path, "Project file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitUsage;
    }

    try {
        if (*serve) {
            sprout::service::ServiceConfig config;
            sprout::service::parse_bind(bind, config);
            config.templates_dir = templates;
            config.gateway = make_gateway(mock);
            config.default_seed = seed;
            g_service = std::make_unique<sprout::service::Service>(config);
            const int port = g_service->bind();
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << config.host << ":" << port << "\n";
            g_service->listen();
            g_service->stop();
            return 0;
        }

        if (*generate) {
            const auto gateway = make_gateway(mock);
            sprout::SourceDocument source(lang, read_file(source_path));
            sprout::Project project =
                sprout::Project::create(sprout::derive_project_id(seed, source), source, seed);
            sprout::engine::EngineConfig config;
            config.seed = seed;
            const sprout::engine::Engine engine(*gateway, load_templates(templates), config);
            std::uint64_t seq = 0;
            auto print = [&](const sprout::Event& e) { std::cout << event_line(++seq, e) << "\n"; };
            std::optional<sprout::Error> failure;
            try {
                engine.run_autopilot(project, budget, print);
            } catch (const sprout::Error& e) {
                failure = e;  // the project is still valid; keep what was generated
            }
            sprout::store::save(project, out_path);
            std::cerr << "wrote " << out_path << ": " << project.active_chain.size() - 1 << " paragraphs, "
                      << project.tree.nodes.size() - 1 << " nodes, " << project.steps.size() << " steps\n";
            if (failure) throw *failure;
            return 0;
        }

        if (*export_cmd) {
            const auto project = sprout::store::load(project_path);
            std::ofstream out(md_path, std::ios::binary | std::ios::trunc);
            if (!out) throw sprout::Error(sprout::ErrorCode::IoError, "cannot write " + md_path, md_path);
            out << sprout::store::export_markdown(project);
            if (!out) throw sprout::Error(sprout::ErrorCode::IoError, "cannot write " + md_path, md_path);
            return 0;
        }

        if (*eval) {
            const auto corpus = sprout::eval::load_corpus(corpus_path);
            const auto gateway = make_gateway(mock);
            sprout::eval::PipelineOptions options;
            options.jobs = jobs;
            options.seed = seed;
            const auto report = sprout::eval::run_pipeline_eval(corpus, *gateway, options);
            const std::string text = sprout::eval::format_report(report);
            if (report_path.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
                if (!out) throw sprout::Error(sprout::ErrorCode::IoError, "cannot write " + report_path, report_path);
                out << text;
            }
            return 0;
        }

        if (*replay) {
            const auto project = sprout::store::load(project_path);
            std::uint64_t seq = 0;
            for (const auto& event : sprout::engine::replay_events(project)) {
                std::cout << event_line(++seq, event) << "\n";
            }
            return 0;
        }
    } catch (const sprout::Error& e) {
        std::cerr << "error: " << sprout::to_string(e.code()) << ": " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}
