#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sprout/anchor.hpp"
#include "sprout/engine.hpp"
#include "sprout/llm.hpp"
#include "sprout/model.hpp"

namespace sprout::eval {

struct LabeledParagraph {
    std::string text;
    std::optional<CodeRange> truth;  // none: the paragraph references no code
};

struct CorpusEntry {
    std::string name;
    SourceDocument source;
    std::vector<LabeledParagraph> paragraphs;
};

struct LabeledCorpus {
    std::vector<CorpusEntry> entries;

    std::size_t paragraph_count() const;
};

/// Reads one entry from `{language, source, paragraphs:[{text, truth:{start,end}|null}]}`.
/// Throws SchemaError whose detail names the entry index and the offending field.
CorpusEntry parse_entry(const nlohmann::json& j, std::size_t index, std::string name = {});

/// A directory of entry files (read in file-name order), or one file holding
/// either a single entry or `{"entries": [...]}`.
LabeledCorpus load_corpus(const std::string& path);

using anchor::PredictionClass;

inline constexpr PredictionClass kErrorClasses[] = {
    PredictionClass::NoCode,
    PredictionClass::IncorrectCodeRange,
    PredictionClass::IncorrectCodeContent,
};

struct EvalReport {
    int total = 0;
    int correct = 0;
    double accuracy = 1.0;  // 1.0 for an empty report
    std::map<PredictionClass, int> errors{{PredictionClass::NoCode, 0},
                                          {PredictionClass::IncorrectCodeRange, 0},
                                          {PredictionClass::IncorrectCodeContent, 0}};
    int skipped_entries = 0;

    bool operator==(const EvalReport&) const = default;
};

/// Builds a report from per-paragraph classes.
EvalReport tally(const std::vector<PredictionClass>& classes);

/// `predictions` follow corpus order, one per paragraph. Throws LengthMismatch.
EvalReport evaluate(const LabeledCorpus& corpus, const std::vector<TextCodeAnchor>& predictions);

/// Pairs generated anchors with one entry's paragraphs: greedy largest line
/// overlap first, then the leftovers in order, and NoCode for paragraphs left
/// without a partner. Returns one prediction per paragraph.
std::vector<TextCodeAnchor> align_predictions(const std::vector<LabeledParagraph>& paragraphs,
                                              const std::vector<TextCodeAnchor>& generated);

struct PipelineOptions {
    engine::GenerationBudget budget{64, 3, 1};
    int jobs = 1;
    std::int64_t seed = 0;
};

/// Runs autopilot on every entry and scores the explanation anchors it produced.
/// Entries whose run fails are skipped and counted.
EvalReport run_pipeline_eval(const LabeledCorpus& corpus, const llm::Gateway& gateway,
                             const PipelineOptions& options = {});

/// Table plus a final machine-readable JSON line.
std::string format_report(const EvalReport& report);

std::string report_json(const EvalReport& report);
EvalReport parse_report_json(const std::string& line);

}  // namespace sprout::eval
