#pragma once

#include <string>

namespace wattbench {

std::string read_file(const std::string& path);

// Writes to a temporary sibling and renames into place, so a failed command
// never leaves a partial artifact behind.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace wattbench
