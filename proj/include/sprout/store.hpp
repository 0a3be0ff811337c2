#pragma once

#include <string>

#include "sprout/project.hpp"

namespace sprout::store {

/// Canonical JSON text of a project: sorted keys, two-space indent, trailing newline.
std::string to_text(const Project& project);

/// Parses and re-validates. Throws SchemaError with the offending JSON pointer as detail.
Project from_text(const std::string& text);

/// Throws IoError when the file cannot be written.
void save(const Project& project, const std::string& path);

/// Throws IoError or SchemaError.
Project load(const std::string& path);

/// The assembled tutorial of the active chain as Markdown.
std::string export_markdown(const Project& project);

}  // namespace sprout::store
