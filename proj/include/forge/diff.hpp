#pragma once

#include <string>
#include <string_view>

namespace forge {

// Line-based unified diff (LCS alignment) with `context` lines of context.
// Returns an empty string when the texts are equal.
std::string unified_diff(std::string_view before, std::string_view after,
                         std::string_view before_label = "a", std::string_view after_label = "b",
                         int context = 3);

}  // namespace forge
