#include "sprout/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "sprout/error.hpp"
#include "sprout/project.hpp"

namespace sprout::eval {

using nlohmann::json;

namespace {

[[noreturn]] void corpus_error(std::size_t index, const std::string& where, const std::string& what) {
    throw Error(ErrorCode::SchemaError, "corpus entry " + std::to_string(index) + ": " + what,
                "entries/" + std::to_string(index) + where);
}

json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path, path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::SchemaError, path + ": " + e.what(), path);
    }
}

std::string percent(double fraction) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.1f%%", fraction * 100.0);
    return buffer;
}

int overlap(const CodeRange& a, const CodeRange& b) {
    return std::max(0, std::min(a.end_line, b.end_line) - std::max(a.start_line, b.start_line) + 1);
}

}  // namespace

std::size_t LabeledCorpus::paragraph_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.paragraphs.size();
    return n;
}

CorpusEntry parse_entry(const json& j, std::size_t index, std::string name) {
    if (!j.is_object()) corpus_error(index, "", "expected an object");
    auto string_field = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) corpus_error(index, std::string("/") + key, "missing string");
        return it->get<std::string>();
    };
    CorpusEntry entry;
    entry.name = std::move(name);
    entry.source = SourceDocument(string_field("language"), string_field("source"));
    auto paragraphs = j.find("paragraphs");
    if (paragraphs == j.end() || !paragraphs->is_array()) corpus_error(index, "/paragraphs", "missing array");
    for (std::size_t i = 0; i < paragraphs->size(); ++i) {
        const json& p = (*paragraphs)[i];
        const std::string where = "/paragraphs/" + std::to_string(i);
        if (!p.is_object() || !p.contains("text") || !p["text"].is_string()) {
            corpus_error(index, where + "/text", "missing text");
        }
        LabeledParagraph paragraph;
        paragraph.text = p["text"].get<std::string>();
        auto truth = p.find("truth");
        if (truth != p.end() && !truth->is_null()) {
            if (!truth->is_object() || !truth->contains("start") || !truth->contains("end") ||
                !(*truth)["start"].is_number_integer() || !(*truth)["end"].is_number_integer()) {
                corpus_error(index, where + "/truth", "truth must be {start, end} or null");
            }
            CodeRange range{(*truth)["start"].get<int>(), (*truth)["end"].get<int>()};
            if (!range.valid_in(entry.source)) corpus_error(index, where + "/truth", "range outside the source");
            paragraph.truth = range;
        }
        entry.paragraphs.push_back(std::move(paragraph));
    }
    return entry;
}

LabeledCorpus load_corpus(const std::string& path) {
    namespace fs = std::filesystem;
    LabeledCorpus corpus;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& item : fs::directory_iterator(path)) {
            if (item.is_regular_file() && item.path().extension() == ".json") files.push_back(item.path());
        }
        std::sort(files.begin(), files.end());
        for (std::size_t i = 0; i < files.size(); ++i) {
            corpus.entries.push_back(parse_entry(read_json(files[i].string()), i, files[i].stem().string()));
        }
        return corpus;
    }
    if (!fs::exists(path)) throw Error(ErrorCode::IoError, "corpus not found: " + path, path);
    const json doc = read_json(path);
    if (doc.is_object() && doc.contains("entries")) {
        if (!doc["entries"].is_array()) throw Error(ErrorCode::SchemaError, "entries must be an array", "entries");
        for (std::size_t i = 0; i < doc["entries"].size(); ++i) {
            corpus.entries.push_back(parse_entry(doc["entries"][i], i, "entry" + std::to_string(i)));
        }
    } else {
        corpus.entries.push_back(parse_entry(doc, 0, fs::path(path).stem().string()));
    }
    return corpus;
}

EvalReport tally(const std::vector<PredictionClass>& classes) {
    EvalReport report;
    report.total = static_cast<int>(classes.size());
    for (auto c : classes) {
        if (c == PredictionClass::Correct) ++report.correct;
        else ++report.errors[c];
    }
    report.accuracy = report.total == 0 ? 1.0 : static_cast<double>(report.correct) / report.total;
    return report;
}

EvalReport evaluate(const LabeledCorpus& corpus, const std::vector<TextCodeAnchor>& predictions) {
    if (predictions.size() != corpus.paragraph_count()) {
        throw Error(ErrorCode::LengthMismatch,
                    "got " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(corpus.paragraph_count()) + " paragraphs",
                    std::to_string(predictions.size()));
    }
    std::vector<PredictionClass> classes;
    std::size_t k = 0;
    for (const auto& entry : corpus.entries) {
        for (const auto& paragraph : entry.paragraphs) {
            classes.push_back(anchor::classify_prediction(predictions[k++], paragraph.truth));
        }
    }
    return tally(classes);
}

std::vector<TextCodeAnchor> align_predictions(const std::vector<LabeledParagraph>& paragraphs,
                                              const std::vector<TextCodeAnchor>& generated) {
    std::vector<std::optional<std::size_t>> partner(paragraphs.size());
    std::vector<bool> used(generated.size(), false);

    // Largest overlap first; ties by generation order, then paragraph order.
    for (;;) {
        int best = 0;
        std::size_t best_g = 0;
        std::size_t best_p = 0;
        for (std::size_t g = 0; g < generated.size(); ++g) {
            if (used[g] || !generated[g].resolved) continue;
            for (std::size_t p = 0; p < paragraphs.size(); ++p) {
                if (partner[p] || !paragraphs[p].truth) continue;
                const int o = overlap(*generated[g].resolved, *paragraphs[p].truth);
                if (o > best) {
                    best = o;
                    best_g = g;
                    best_p = p;
                }
            }
        }
        if (best == 0) break;
        used[best_g] = true;
        partner[best_p] = best_g;
    }
    std::size_t g = 0;
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
        if (partner[p] || !paragraphs[p].truth) continue;
        while (g < generated.size() && used[g]) ++g;
        if (g == generated.size()) break;
        used[g] = true;
        partner[p] = g;
    }

    std::vector<TextCodeAnchor> out;
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
        if (partner[p]) {
            out.push_back(generated[*partner[p]]);
        } else {
            TextCodeAnchor none;
            none.status = AnchorStatus::NoCode;
            none.explanation = paragraphs[p].text;
            out.push_back(std::move(none));
        }
    }
    return out;
}

EvalReport run_pipeline_eval(const LabeledCorpus& corpus, const llm::Gateway& gateway,
                             const PipelineOptions& options) {
    struct Outcome {
        bool skipped = false;
        std::vector<PredictionClass> classes;
    };
    std::vector<Outcome> outcomes(corpus.entries.size());
    engine::EngineConfig config;
    config.seed = options.seed;
    const engine::Engine engine(gateway, prompts::PromptTemplateSet::defaults(), config);

    auto run_entry = [&](std::size_t i) {
        const auto& entry = corpus.entries[i];
        Project project = Project::create(derive_project_id(options.seed, entry.source), entry.source, options.seed);
        try {
            engine.run_autopilot(project, options.budget, {});
        } catch (const Error&) {
            outcomes[i].skipped = true;
            return;
        }
        std::vector<TextCodeAnchor> generated;
        for (const auto& id : project.active_chain.node_ids) {
            const auto& node = project.tree.node(id);
            if (node.anchor) generated.push_back(*node.anchor);
        }
        const auto predictions = align_predictions(entry.paragraphs, generated);
        for (std::size_t p = 0; p < predictions.size(); ++p) {
            outcomes[i].classes.push_back(anchor::classify_prediction(predictions[p], entry.paragraphs[p].truth));
        }
    };

    const std::size_t jobs = static_cast<std::size_t>(std::max(1, options.jobs));
    if (jobs == 1) {
        for (std::size_t i = 0; i < corpus.entries.size(); ++i) run_entry(i);
    } else {
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                for (std::size_t i = w; i < corpus.entries.size(); i += jobs) run_entry(i);
            });
        }
        for (auto& t : workers) t.join();
    }

    std::vector<PredictionClass> classes;
    int skipped = 0;
    for (const auto& o : outcomes) {
        if (o.skipped) ++skipped;
        classes.insert(classes.end(), o.classes.begin(), o.classes.end());
    }
    EvalReport report = tally(classes);
    report.skipped_entries = skipped;
    return report;
}

std::string report_json(const EvalReport& report) {
    json errors = json::object();
    for (auto c : kErrorClasses) errors[std::string(anchor::to_string(c))] = report.errors.at(c);
    return json{{"total", report.total},
                {"correct", report.correct},
                {"accuracy", report.accuracy},
                {"errors", errors},
                {"skipped_entries", report.skipped_entries}}
        .dump();
}

EvalReport parse_report_json(const std::string& line) {
    try {
        const json j = json::parse(line);
        EvalReport report;
        report.total = j.at("total").get<int>();
        report.correct = j.at("correct").get<int>();
        report.accuracy = j.at("accuracy").get<double>();
        for (auto c : kErrorClasses) report.errors[c] = j.at("errors").at(std::string(anchor::to_string(c))).get<int>();
        report.skipped_entries = j.value("skipped_entries", 0);
        return report;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("bad report line: ") + e.what(), "report");
    }
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    char row[96];
    std::snprintf(row, sizeof row, "%-22s %7s %8s\n", "category", "count", "share");
    out << row;
    auto line = [&](std::string_view name, int count) {
        const double share = report.total == 0 ? 0.0 : static_cast<double>(count) / report.total;
        std::snprintf(row, sizeof row, "%-22s %7d %8s\n", std::string(name).c_str(), count, percent(share).c_str());
        out << row;
    };
    line("Correct", report.correct);
    for (auto c : kErrorClasses) line(anchor::to_string(c), report.errors.at(c));
    if (report.skipped_entries > 0) out << "skipped entries: " << report.skipped_entries << "\n";
    out << "accuracy " << percent(report.accuracy) << " (" << report.total << " paragraphs)\n";
    out << report_json(report) << "\n";
    return out.str();
}

}  // namespace sprout::eval
