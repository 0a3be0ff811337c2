#include "sprout/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include "sprout/error.hpp"

namespace sprout::prompts {

namespace {

// Generated at configure time from templates/*.txt.
#include "default_templates.inc"

constexpr std::pair<TemplateKind, std::string_view> kFiles[] = {
    {TemplateKind::System, "system.txt"},
    {TemplateKind::Plan, "plan.txt"},
    {TemplateKind::Vote, "vote.txt"},
    {TemplateKind::Write, "write.txt"},
    {TemplateKind::UserDefinedGeneration, "user_defined_generation.txt"},
    {TemplateKind::SplitMultiStep, "split_multi_step.txt"},
    {TemplateKind::GroupOneParagraph, "group_one_paragraph.txt"},
    {TemplateKind::StyleRefine, "style_refine.txt"},
    {TemplateKind::DetailRefine, "detail_refine.txt"},
    {TemplateKind::FreeRefine, "free_refine.txt"},
};

}  // namespace

std::string_view file_name(TemplateKind kind) {
    for (const auto& [k, name] : kFiles) {
        if (k == kind) return name;
    }
    return {};
}

PromptTemplateSet PromptTemplateSet::defaults() {
    PromptTemplateSet set;
    for (const auto& [kind, name] : kFiles) {
        bool found = false;
        for (const auto& entry : kDefaultTemplates) {
            if (entry.name == name) {
                set.templates_[kind] = std::string(entry.text);
                found = true;
            }
        }
        if (!found) throw Error(ErrorCode::NotFound, "missing built-in template", std::string(name));
    }
    return set;
}

PromptTemplateSet PromptTemplateSet::load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "template directory not found: " + dir, dir);
    PromptTemplateSet set = defaults();
    for (const auto& [kind, name] : kFiles) {
        const fs::path path = fs::path(dir) / name;
        if (!fs::exists(path)) continue;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::IoError, "cannot read template " + path.string(), path.string());
        std::stringstream buffer;
        buffer << in.rdbuf();
        set.templates_[kind] = buffer.str();
    }
    return set;
}

std::string render(std::string_view tmpl, const Params& params) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        const std::string_view name = tmpl.substr(open + 2, close - open - 2);
        const auto it = params.find(name);
        if (it == params.end()) {
            throw Error(ErrorCode::InvalidArgument, "template parameter missing: " + std::string(name),
                        std::string(name));
        }
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

TemplateKind template_for(InterventionKind kind) {
    switch (kind) {
        case InterventionKind::UserDefinedGeneration: return TemplateKind::UserDefinedGeneration;
        case InterventionKind::SplitMultiStep: return TemplateKind::SplitMultiStep;
        case InterventionKind::GroupOneParagraph: return TemplateKind::GroupOneParagraph;
        case InterventionKind::StyleRefine: return TemplateKind::StyleRefine;
        case InterventionKind::DetailRefine: return TemplateKind::DetailRefine;
        case InterventionKind::FreeRefine: return TemplateKind::FreeRefine;
    }
    return TemplateKind::FreeRefine;
}

std::string_view to_string(DetailDirection direction) {
    return direction == DetailDirection::Shorter ? "shorter" : "longer";
}

std::string code_block(std::string_view code, std::string_view language) {
    if (code.find_first_not_of(" \t\r\n") == std::string_view::npos) return " the content below ";
    std::string fence = "```";
    while (code.find(fence) != std::string_view::npos) fence.push_back('`');
    std::string out = "\n" + fence + std::string(language) + "\n";
    out.append(code);
    out += "\n" + fence + "\n";
    return out;
}

std::string build_intervention_prompt(const PromptTemplateSet& templates, InterventionKind kind,
                                      const InterventionParams& params) {
    auto missing = [](std::string_view what) {
        return Error(ErrorCode::InvalidArgument, "intervention needs " + std::string(what), std::string(what));
    };
    const bool has_code = params.code.find_first_not_of(" \t\r\n") != std::string::npos;
    switch (kind) {
        case InterventionKind::UserDefinedGeneration:
            if (!has_code) throw missing("code");
            break;
        case InterventionKind::SplitMultiStep:
        case InterventionKind::GroupOneParagraph:
            if (!has_code && params.paragraph.empty()) throw missing("code");
            break;
        case InterventionKind::StyleRefine:
            if (params.style.empty()) throw missing("style");
            break;
        case InterventionKind::DetailRefine:
            if (!params.direction) throw missing("direction");
            break;
        case InterventionKind::FreeRefine:
            if (params.prompt.empty()) throw missing("prompt");
            break;
    }
    const Params values{
        {"code_block", code_block(params.code, params.language)},
        {"paragraph", params.paragraph},
        {"context", params.context},
        {"style", params.style},
        {"direction", params.direction ? std::string(to_string(*params.direction)) : std::string()},
        {"prompt", params.prompt},
        {"step", std::to_string(params.step)},
    };
    return render(templates.get(template_for(kind)), values);
}

std::string build_intervention_prompt(InterventionKind kind, const InterventionParams& params) {
    static const PromptTemplateSet templates = PromptTemplateSet::defaults();
    return build_intervention_prompt(templates, kind, params);
}

}  // namespace sprout::prompts
