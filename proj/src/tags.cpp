#include "metaspo/tags.hpp"

#include <cctype>

namespace metaspo {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

// Matches '<' [ws] ['/' if closing] [ws] tag [ws] '>' starting at `pos`.
// On success returns the index one past '>'.
std::optional<std::size_t> match_tag(std::string_view text, std::size_t pos, std::string_view tag,
                                     bool closing) {
  if (pos >= text.size() || text[pos] != '<') return std::nullopt;
  std::size_t i = pos + 1;
  while (i < text.size() && is_space(text[i])) ++i;
  if (closing) {
    if (i >= text.size() || text[i] != '/') return std::nullopt;
    ++i;
    while (i < text.size() && is_space(text[i])) ++i;
  }
  if (i + tag.size() > text.size()) return std::nullopt;
  if (!iequals(text.substr(i, tag.size()), tag)) return std::nullopt;
  i += tag.size();
  while (i < text.size() && is_space(text[i])) ++i;
  if (i >= text.size() || text[i] != '>') return std::nullopt;
  return i + 1;
}

}  // namespace

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  return std::string(text.substr(begin, end - begin));
}

std::optional<std::string> last_tag_content(std::string_view text, std::string_view tag) {
  std::optional<std::string> found;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t lt = text.find('<', pos);
    if (lt == std::string_view::npos) break;
    auto open_end = match_tag(text, lt, tag, /*closing=*/false);
    if (!open_end) {
      pos = lt + 1;
      continue;
    }
    // Scan forward for the matching close tag.
    std::size_t scan = *open_end;
    bool closed = false;
    while (scan < text.size()) {
      const std::size_t next_lt = text.find('<', scan);
      if (next_lt == std::string_view::npos) break;
      if (auto close_end = match_tag(text, next_lt, tag, /*closing=*/true)) {
        found = std::string(text.substr(*open_end, next_lt - *open_end));
        pos = *close_end;
        closed = true;
        break;
      }
      scan = next_lt + 1;
    }
    if (!closed) pos = *open_end;
  }
  return found;
}

}  // namespace metaspo
