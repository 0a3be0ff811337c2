#include "sprout/anchor.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "sprout/error.hpp"

namespace sprout::anchor {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

enum class Label { None, Step, Code, Explanation, Summary };

// Recognizes "LABEL:" at the start of a line, tolerating markdown emphasis.
Label read_label(std::string_view line, std::string_view& rest) {
    std::string_view t = trim(line);
    while (!t.empty() && (t.front() == '*' || t.front() == '#')) t.remove_prefix(1);
    t = trim(t);
    static constexpr std::pair<std::string_view, Label> kLabels[] = {
        {"step", Label::Step},
        {"code", Label::Code},
        {"explanation", Label::Explanation},
        {"summary", Label::Summary},
    };
    for (const auto& [name, label] : kLabels) {
        if (t.size() <= name.size()) continue;
        bool match = true;
        for (std::size_t i = 0; i < name.size(); ++i) {
            if (std::tolower(static_cast<unsigned char>(t[i])) != name[i]) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        std::string_view after = t.substr(name.size());
        while (!after.empty() && after.front() == '*') after.remove_prefix(1);
        if (after.empty() || after.front() != ':') continue;
        after.remove_prefix(1);
        while (!after.empty() && after.front() == '*') after.remove_prefix(1);
        rest = trim(after);
        return label;
    }
    return Label::None;
}

bool is_fence(std::string_view line) { return trim(line).substr(0, 3) == "```"; }

std::string truncate_words(std::string_view text, int max_words) {
    std::string out;
    int words = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        if (i >= text.size()) break;
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j])) ++j;
        if (words == max_words) break;
        if (!out.empty()) out.push_back(' ');
        out.append(text.substr(i, j - i));
        ++words;
        i = j;
    }
    return out;
}

}  // namespace

ParsedWriteResponse parse_write_response(std::string_view raw) {
    ParsedWriteResponse parsed;
    const auto lines = split_lines(raw);

    std::string explanation;
    std::string summary;
    bool saw_code_label = false;
    std::optional<std::string> code;
    std::optional<std::string> unlabeled_fence;
    std::string* collecting = nullptr;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view rest;
        const Label label = read_label(lines[i], rest);
        if (label == Label::None && collecting == nullptr && is_fence(lines[i])) {
            // A fenced block with no CODE label still counts if it comes first.
            std::string body;
            std::size_t j = i + 1;
            for (; j < lines.size() && !is_fence(lines[j]); ++j) {
                if (j != i + 1) body.push_back('\n');
                body.append(lines[j]);
            }
            if (!unlabeled_fence) unlabeled_fence = body;
            i = j;
            continue;
        }
        switch (label) {
            case Label::Step: {
                collecting = nullptr;
                const auto digits = rest.find_first_of("0123456789");
                if (digits != std::string_view::npos) {
                    parsed.step_number = std::atoi(std::string(rest.substr(digits)).c_str());
                }
                break;
            }
            case Label::Code: {
                collecting = nullptr;
                saw_code_label = true;
                if (!rest.empty() && rest.substr(0, 3) != "```") {
                    code = std::string(rest);
                    break;
                }
                std::size_t open = i + 1;
                if (rest.substr(0, 3) == "```") {
                    open = i;  // fence opened on the label line
                } else {
                    while (open < lines.size() && trim(lines[open]).empty()) ++open;
                    if (open >= lines.size() || !is_fence(lines[open])) {
                        code = std::string();
                        break;
                    }
                }
                std::string body;
                std::size_t j = open + 1;
                for (; j < lines.size() && !is_fence(lines[j]); ++j) {
                    if (j != open + 1) body.push_back('\n');
                    body.append(lines[j]);
                }
                code = std::move(body);
                i = j;
                break;
            }
            case Label::Explanation:
                explanation.assign(rest);
                collecting = &explanation;
                break;
            case Label::Summary:
                summary.assign(rest);
                collecting = &summary;
                break;
            case Label::None:
                if (collecting) {
                    collecting->push_back('\n');
                    collecting->append(lines[i]);
                }
                break;
        }
    }

    if (code) {
        parsed.quoted_code = std::move(*code);
    } else if (!saw_code_label && unlabeled_fence) {
        parsed.quoted_code = std::move(*unlabeled_fence);
    }
    parsed.explanation = std::string(trim(explanation));
    parsed.summary = truncate_words(trim(summary), kMaxSummaryWords);
    if (parsed.explanation.empty()) {
        throw Error(ErrorCode::MissingField, "response has no EXPLANATION field", "explanation");
    }
    if (parsed.summary.empty()) {
        throw Error(ErrorCode::MissingField, "response has no SUMMARY field", "summary");
    }
    return parsed;
}

std::vector<std::string> split_write_blocks(std::string_view raw) {
    std::vector<std::string> blocks;
    bool in_fence = false;
    for (auto line : split_lines(raw)) {
        std::string_view rest;
        if (!in_fence && read_label(line, rest) == Label::Step) blocks.emplace_back();
        if (is_fence(line)) in_fence = !in_fence;
        if (!blocks.empty()) {
            blocks.back().append(line);
            blocks.back().push_back('\n');
        }
    }
    return blocks;
}

std::string normalize_whitespace(std::string_view line) {
    std::string out;
    bool pending_space = false;
    for (char c : trim(line)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::vector<MatchCandidate> find_matches(std::string_view quoted_code, const SourceDocument& source) {
    std::vector<MatchCandidate> out;
    if (trim(quoted_code).empty()) return out;

    const std::string& text = source.text();
    for (auto pos = text.find(quoted_code); pos != std::string::npos; pos = text.find(quoted_code, pos + 1)) {
        const CodeRange range{source.line_at_offset(pos), source.line_at_offset(pos + quoted_code.size() - 1)};
        MatchCandidate candidate{range, Exactness::Exact};
        if (std::find(out.begin(), out.end(), candidate) == out.end()) out.push_back(candidate);
    }

    if (out.empty()) {
        std::vector<std::string> wanted;
        for (auto line : split_lines(quoted_code)) {
            auto normalized = normalize_whitespace(line);
            if (!normalized.empty()) wanted.push_back(std::move(normalized));
        }
        std::vector<std::string> lines;
        lines.reserve(static_cast<std::size_t>(source.line_count()));
        for (int i = 1; i <= source.line_count(); ++i) lines.push_back(normalize_whitespace(source.line(i)));

        for (std::size_t start = 0; start < lines.size() && !wanted.empty(); ++start) {
            if (lines[start] != wanted[0]) continue;
            std::size_t cursor = start;
            bool matched = true;
            for (std::size_t k = 1; k < wanted.size(); ++k) {
                ++cursor;
                while (cursor < lines.size() && lines[cursor].empty()) ++cursor;
                if (cursor >= lines.size() || lines[cursor] != wanted[k]) {
                    matched = false;
                    break;
                }
            }
            if (matched) {
                out.push_back({{static_cast<int>(start) + 1, static_cast<int>(cursor) + 1},
                               Exactness::WhitespaceNormalized});
            }
        }
    }

    std::stable_sort(out.begin(), out.end(), [](const MatchCandidate& a, const MatchCandidate& b) {
        return a.range < b.range;
    });
    return out;
}

TextCodeAnchor resolve_anchor(const ParsedWriteResponse& parsed, const SourceDocument& source,
                              std::optional<CodeRange> previous) {
    TextCodeAnchor anchor;
    anchor.step_number = std::max(1, parsed.step_number);
    anchor.quoted_code = parsed.quoted_code;
    anchor.explanation = parsed.explanation;
    anchor.summary = parsed.summary;

    if (trim(parsed.quoted_code).empty()) {
        anchor.status = AnchorStatus::NoCode;
        return anchor;
    }
    const auto candidates = find_matches(parsed.quoted_code, source);
    if (candidates.empty()) {
        anchor.status = AnchorStatus::ContentMismatch;
        return anchor;
    }
    const MatchCandidate* chosen = &candidates.front();
    if (candidates.size() > 1 && previous) {
        long best = -1;
        for (const auto& c : candidates) {
            const long distance = std::labs(static_cast<long>(c.range.start_line) - previous->end_line);
            // Candidates are sorted, so strict < keeps the smallest start on ties.
            if (best < 0 || distance < best) {
                best = distance;
                chosen = &c;
            }
        }
    }
    anchor.status = AnchorStatus::Resolved;
    anchor.resolved = chosen->range;
    anchor.ambiguous = candidates.size() > 1;
    return anchor;
}

std::string_view to_string(PredictionClass value) {
    switch (value) {
        case PredictionClass::Correct: return "Correct";
        case PredictionClass::NoCode: return "NoCode";
        case PredictionClass::IncorrectCodeRange: return "IncorrectCodeRange";
        case PredictionClass::IncorrectCodeContent: return "IncorrectCodeContent";
    }
    return "Unknown";
}

PredictionClass classify_prediction(const TextCodeAnchor& predicted, std::optional<CodeRange> truth) {
    switch (predicted.status) {
        case AnchorStatus::NoCode:
            return truth ? PredictionClass::NoCode : PredictionClass::Correct;
        case AnchorStatus::ContentMismatch:
            return PredictionClass::IncorrectCodeContent;
        case AnchorStatus::Resolved:
            return predicted.resolved == truth ? PredictionClass::Correct : PredictionClass::IncorrectCodeRange;
        case AnchorStatus::Ambiguous:
            break;
    }
    return PredictionClass::IncorrectCodeRange;
}

}  // namespace sprout::anchor
