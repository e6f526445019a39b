#pragma once

#include <string_view>

namespace wattbench {

// Case-sensitive glob over opcode text: `*` matches any run of characters,
// `?` matches exactly one. `.` has no special meaning.
bool glob_match(std::string_view pattern, std::string_view text);

}  // namespace wattbench
