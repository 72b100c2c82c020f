#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace metaspo {

std::string trim(std::string_view text);

// Content of the last well-formed <tag>...</tag> pair. The tag name match is
// case-insensitive and whitespace inside the angle brackets is tolerated
// (e.g. "< /Answer >"). Pairs are formed left to right: each opening tag
// closes at the next matching close tag. Returns nullopt when no pair exists.
std::optional<std::string> last_tag_content(std::string_view text, std::string_view tag);

}  // namespace metaspo
