#include "sprout/store.hpp"

#include <fstream>
#include <sstream>

#include "sprout/error.hpp"
#include "sprout/serialize.hpp"

namespace sprout::store {

std::string to_text(const Project& project) { return Json(project).dump(2) + "\n"; }

Project from_text(const std::string& text) {
    Json parsed;
    try {
        parsed = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::SchemaError, std::string("not valid JSON: ") + e.what(), "");
    }
    return decode_project(parsed);
}

void save(const Project& project, const std::string& path) {
    const std::string text = to_text(project);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing", path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path, path);
}

Project load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path, path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_text(buffer.str());
}

std::string export_markdown(const Project& project) {
    const auto blocks = derive_tutorial(project.tree, project.active_chain);
    std::string out;
    const TutorialBlock* title = nullptr;
    for (const auto& block : blocks) {
        if (block.action == ActionType::WriteTitle) {
            title = &block;
            break;
        }
    }
    out += "# " + (title ? title->paragraph : std::string("Untitled Tutorial")) + "\n";

    for (const auto& block : blocks) {
        if (&block == title) continue;
        if (block.action != ActionType::WriteTitle) out += "\n## " + block.brief + "\n\n";
        else out += "\n";
        if (block.anchor && block.anchor->resolved) {
            const auto& range = *block.anchor->resolved;
            const std::string code = slice_lines(project.source, range);
            std::string fence = "```";
            while (code.find(fence) != std::string::npos) fence.push_back('`');
            out += "<!-- lines " + std::to_string(range.start_line) + "-" + std::to_string(range.end_line) + " -->\n";
            out += fence + project.source.language_tag() + "\n" + code + "\n" + fence + "\n\n";
        }
        out += block.paragraph + "\n";
    }
    return out;
}

}  // namespace sprout::store
