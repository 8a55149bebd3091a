#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace svo {

/// A normalized (subject, verb, object) lemma triad.
struct Triple {
  std::string subject;
  std::string verb;
  std::string object;

  auto operator<=>(const Triple&) const = default;
  bool operator==(const Triple&) const = default;

  /// "subject-verb-object"
  std::string dashed() const { return subject + '-' + verb + '-' + object; }
};

/// Lowercases ASCII letters; nullopt if the result is empty or contains
/// anything outside a-z.
inline std::optional<std::string> normalize_lemma(std::string_view raw) {
  if (raw.empty()) return std::nullopt;
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c < 'a' || c > 'z') return std::nullopt;
    out.push_back(c);
  }
  return out;
}

inline bool is_normalized_lemma(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < 'a' || c > 'z') return false;
  return true;
}

inline bool is_valid_triple(const Triple& t) {
  return is_normalized_lemma(t.subject) && is_normalized_lemma(t.verb) &&
         is_normalized_lemma(t.object);
}

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    const std::hash<std::string> h;
    std::size_t seed = h(t.subject);
    seed ^= h(t.verb) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
    seed ^= h(t.object) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
    return seed;
  }
};

}  // namespace svo
