#pragma once

// Counted multiset of triples plus per-role occurrence tables.
//
// File format (one row per unique triple, no header):
//   subject \t verb \t object \t count \n
// written sorted by count descending, then lexicographically.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "svo/errors.hpp"
#include "svo/text.hpp"
#include "svo/triple.hpp"

namespace svo {

enum class Role { subject = 0, verb = 1, object = 2 };

using RoleFreq = std::map<std::string, std::uint64_t, std::less<>>;

class TripleStore {
 public:
  using CountMap = std::unordered_map<Triple, std::uint64_t, TripleHash>;

  void add(const Triple& t, std::uint64_t count = 1) {
    if (count == 0) return;
    counts_[t] += count;
    roles_[0][t.subject] += count;
    roles_[1][t.verb] += count;
    roles_[2][t.object] += count;
    total_ += count;
  }

  std::uint64_t count(const Triple& t) const {
    auto it = counts_.find(t);
    return it == counts_.end() ? 0 : it->second;
  }
  bool contains(const Triple& t) const { return counts_.contains(t); }

  std::size_t unique_size() const { return counts_.size(); }
  std::uint64_t total_count() const { return total_; }
  bool empty() const { return counts_.empty(); }

  const CountMap& counts() const { return counts_; }
  const RoleFreq& role_freq(Role r) const { return roles_[static_cast<int>(r)]; }

  /// Entries sorted by count descending, ties by (subject, verb, object).
  std::vector<std::pair<Triple, std::uint64_t>> sorted_entries() const {
    std::vector<std::pair<Triple, std::uint64_t>> out(counts_.begin(), counts_.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    return out;
  }

  /// Recomputes role tables from counts and compares.
  bool check_invariants() const {
    RoleFreq fresh[3];
    std::uint64_t total = 0;
    for (const auto& [t, c] : counts_) {
      if (c == 0) return false;
      fresh[0][t.subject] += c;
      fresh[1][t.verb] += c;
      fresh[2][t.object] += c;
      total += c;
    }
    if (total != total_) return false;
    for (int r = 0; r < 3; ++r)
      if (fresh[r] != roles_[r]) return false;
    return true;
  }

  bool operator==(const TripleStore& o) const { return total_ == o.total_ && counts_ == o.counts_; }

 private:
  CountMap counts_;
  RoleFreq roles_[3];
  std::uint64_t total_ = 0;
};

inline void merge_into(TripleStore& dst, const TripleStore& src) {
  for (const auto& [t, c] : src.counts()) dst.add(t, c);
}

inline TripleStore merge(const TripleStore& a, const TripleStore& b) {
  TripleStore out = a;
  merge_into(out, b);
  return out;
}

/// The k most frequent triples, ties broken lexicographically.
inline std::vector<std::pair<Triple, std::uint64_t>> top_k(const TripleStore& store, std::size_t k) {
  auto all = store.sorted_entries();
  if (all.size() > k) all.resize(k);
  return all;
}

inline void write_tsv(std::ostream& out, const TripleStore& store) {
  for (const auto& [t, c] : store.sorted_entries())
    out << t.subject << '\t' << t.verb << '\t' << t.object << '\t' << c << '\n';
}

struct IngestStats {
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::size_t non_alphabetic = 0;
  std::size_t below_min_count = 0;
  std::size_t accepted = 0;
};

/// Reads an external subject\tverb\tobject\tcount table (any order). Rows with
/// a slot failing normalize_lemma or a count below min_count are dropped;
/// malformed rows are skipped and counted unless strict, where they throw.
inline TripleStore ingest_external_triples(std::istream& in, std::uint64_t min_count,
                                           IngestStats* stats = nullptr, bool strict = false) {
  IngestStats local;
  IngestStats& st = stats ? *stats : local;
  TripleStore store;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::strip_cr(raw);
    if (line.empty()) continue;
    ++st.rows;
    const auto cols = text::split(line, '\t');
    std::optional<std::uint64_t> count;
    if (cols.size() == 4) count = text::parse_int<std::uint64_t>(cols[3]);
    if (!count) {
      if (strict) throw MalformedRow("row " + std::to_string(line_no) + ": expected s\\tv\\to\\tcount");
      ++st.malformed;
      continue;
    }
    auto s = normalize_lemma(cols[0]);
    auto v = normalize_lemma(cols[1]);
    auto o = normalize_lemma(cols[2]);
    if (!s || !v || !o) {
      ++st.non_alphabetic;
      continue;
    }
    if (*count < min_count || *count == 0) {
      ++st.below_min_count;
      continue;
    }
    ++st.accepted;
    store.add(Triple{std::move(*s), std::move(*v), std::move(*o)}, *count);
  }
  return store;
}

/// Strict reader for files produced by write_tsv.
inline TripleStore read_tsv(std::istream& in) {
  TripleStore store;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto cols = text::split(raw, '\t');
    auto bad = [&](const char* why) {
      return FormatError("triple file row " + std::to_string(line_no) + ": " + why);
    };
    if (cols.size() != 4) throw bad("expected 4 columns");
    const auto count = text::parse_int<std::uint64_t>(cols[3]);
    if (!count || *count == 0) throw bad("count must be a positive integer");
    Triple t{std::string(cols[0]), std::string(cols[1]), std::string(cols[2])};
    if (!is_valid_triple(t)) throw bad("lemma outside [a-z]+");
    if (store.contains(t)) throw bad("duplicate triple");
    store.add(t, *count);
  }
  return store;
}

inline void save(const TripleStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  write_tsv(out, store);
  if (!out) throw Error("write failed: " + path.string());
}

inline TripleStore load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  return read_tsv(in);
}

}  // namespace svo
