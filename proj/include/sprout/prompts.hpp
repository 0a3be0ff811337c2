#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace sprout::prompts {

enum class TemplateKind {
    System,
    Plan,
    Vote,
    Write,
    UserDefinedGeneration,
    SplitMultiStep,
    GroupOneParagraph,
    StyleRefine,
    DetailRefine,
    FreeRefine,
};

/// Asset file name of a template, e.g. "split_multi_step.txt".
std::string_view file_name(TemplateKind kind);

class PromptTemplateSet {
public:
    /// The templates shipped in templates/, compiled in.
    static PromptTemplateSet defaults();

    /// Defaults overridden by any template files present in `dir`.
    static PromptTemplateSet load_dir(const std::string& dir);

    const std::string& get(TemplateKind kind) const { return templates_.at(kind); }
    void set(TemplateKind kind, std::string text) { templates_[kind] = std::move(text); }

private:
    std::map<TemplateKind, std::string> templates_;
};

using Params = std::map<std::string, std::string, std::less<>>;

/// Substitutes every `{{name}}`. Throws InvalidArgument for names not in `params`.
std::string render(std::string_view tmpl, const Params& params);

enum class InterventionKind {
    UserDefinedGeneration,
    SplitMultiStep,
    GroupOneParagraph,
    StyleRefine,
    DetailRefine,
    FreeRefine,
};

TemplateKind template_for(InterventionKind kind);

enum class DetailDirection { Shorter, Longer };

std::string_view to_string(DetailDirection direction);

struct InterventionParams {
    std::string code;
    std::string language;
    std::string paragraph;
    std::string context;
    std::string style;
    std::optional<DetailDirection> direction;
    std::string prompt;
    int step = 1;
};

/// The inline code placeholder: a fenced block, or a phrase pointing at the
/// paragraph when there is no code.
std::string code_block(std::string_view code, std::string_view language);

/// Throws InvalidArgument when a parameter the kind needs is missing.
std::string build_intervention_prompt(const PromptTemplateSet& templates, InterventionKind kind,
                                      const InterventionParams& params);

std::string build_intervention_prompt(InterventionKind kind, const InterventionParams& params);

}  // namespace sprout::prompts
