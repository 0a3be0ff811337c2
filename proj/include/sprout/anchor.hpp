#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sprout/model.hpp"

namespace sprout::anchor {

inline constexpr int kMaxSummaryWords = 12;

struct ParsedWriteResponse {
    int step_number = 0;  // 0 when the model gave none
    std::string quoted_code;
    std::string explanation;
    std::string summary;

    bool operator==(const ParsedWriteResponse&) const = default;
};

/// Reads the labeled STEP / CODE / EXPLANATION / SUMMARY block.
/// Throws MissingField with detail "explanation" or "summary".
ParsedWriteResponse parse_write_response(std::string_view raw);

/// Cuts a multi-step answer into one raw block per `STEP:` label. Text before
/// the first label is dropped; fenced code is never split.
std::vector<std::string> split_write_blocks(std::string_view raw);

enum class Exactness { Exact, WhitespaceNormalized };

struct MatchCandidate {
    CodeRange range;
    Exactness exactness = Exactness::Exact;

    bool operator==(const MatchCandidate&) const = default;
};

/// Trims the line and collapses inner whitespace runs to one space.
std::string normalize_whitespace(std::string_view line);

/// Exact substring hits first; only if there are none, whitespace-normalized
/// line-sequence hits. Sorted by start line.
std::vector<MatchCandidate> find_matches(std::string_view quoted_code, const SourceDocument& source);

TextCodeAnchor resolve_anchor(const ParsedWriteResponse& parsed, const SourceDocument& source,
                              std::optional<CodeRange> previous);

enum class PredictionClass { Correct, NoCode, IncorrectCodeRange, IncorrectCodeContent };

std::string_view to_string(PredictionClass value);

PredictionClass classify_prediction(const TextCodeAnchor& predicted, std::optional<CodeRange> truth);

}  // namespace sprout::anchor
