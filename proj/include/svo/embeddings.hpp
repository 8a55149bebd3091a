#pragma once

// Static word vectors in the plain text format:
//   token v1 v2 ... vd
// An optional leading "<count> <dim>" header row is detected and skipped.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "svo/errors.hpp"
#include "svo/sampling.hpp"
#include "svo/text.hpp"
#include "svo/triple.hpp"

namespace svo {

enum class OovPolicy { drop, mean_vector };

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t dim, std::unordered_map<std::string, std::vector<double>> vectors,
                 OovPolicy policy = OovPolicy::drop)
      : dim_(dim), vectors_(std::move(vectors)), policy_(policy) {
    mean_.assign(dim_, 0.0);
    if (vectors_.empty()) return;
    // Sum in sorted key order so the mean does not depend on hash layout.
    std::vector<const std::string*> keys;
    keys.reserve(vectors_.size());
    for (const auto& kv : vectors_) keys.push_back(&kv.first);
    std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });
    for (const auto* k : keys) {
      const auto& v = vectors_.at(*k);
      if (v.size() != dim_) throw InconsistentDim("vector for '" + *k + "' has wrong length");
      for (std::size_t i = 0; i < dim_; ++i) mean_[i] += v[i];
    }
    for (double& m : mean_) m /= static_cast<double>(vectors_.size());
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  OovPolicy oov_policy() const { return policy_; }
  void set_oov_policy(OovPolicy p) { policy_ = p; }

  const std::vector<double>* find(std::string_view token) const {
    auto it = vectors_.find(std::string(token));
    return it == vectors_.end() ? nullptr : &it->second;
  }
  bool contains(std::string_view token) const { return find(token) != nullptr; }
  std::span<const double> mean() const { return mean_; }
  const std::unordered_map<std::string, std::vector<double>>& vectors() const { return vectors_; }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::vector<double> mean_;
  OovPolicy policy_ = OovPolicy::drop;
};

struct VectorLoadStats {
  std::size_t rows = 0;
  std::size_t kept = 0;
  std::size_t filtered = 0;
  std::size_t inconsistent = 0;
  std::size_t duplicates = 0;
  bool header_skipped = false;
};

using VocabFilter = std::set<std::string, std::less<>>;

inline EmbeddingTable load_vectors(std::istream& in, const VocabFilter* vocab_filter = nullptr,
                                   OovPolicy policy = OovPolicy::drop, bool strict = false,
                                   VectorLoadStats* stats = nullptr) {
  VectorLoadStats local;
  VectorLoadStats& st = stats ? *stats : local;
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::size_t dim = 0;
  std::string raw;
  std::size_t line_no = 0;
  bool first_row = true;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::strip_cr(raw);
    const auto fields = text::split_ws(line);
    if (fields.empty()) continue;
    if (first_row) {
      first_row = false;
      if (fields.size() == 2 && text::parse_int<std::uint64_t>(fields[0]) &&
          text::parse_int<std::uint64_t>(fields[1])) {
        st.header_skipped = true;
        continue;
      }
    }
    ++st.rows;
    const std::size_t d = fields.size() - 1;
    if (dim == 0) dim = d;
    auto inconsistent = [&] {
      if (strict)
        throw InconsistentDim("vector row " + std::to_string(line_no) + " has " +
                              std::to_string(d) + " values, expected " + std::to_string(dim));
      ++st.inconsistent;
    };
    if (d != dim || d == 0) {
      inconsistent();
      continue;
    }
    if (vocab_filter && !vocab_filter->contains(fields[0])) {
      ++st.filtered;
      continue;
    }
    std::vector<double> v(d);
    bool ok = true;
    for (std::size_t i = 0; i < d; ++i) {
      auto x = text::parse_double(fields[i + 1]);
      if (!x) {
        ok = false;
        break;
      }
      v[i] = *x;
    }
    if (!ok) {
      inconsistent();
      continue;
    }
    auto [it, inserted] = vectors.try_emplace(std::string(fields[0]), std::move(v));
    if (!inserted) {
      ++st.duplicates;
      continue;
    }
    ++st.kept;
  }
  if (vectors.empty()) throw EmptyTable("no embedding rows retained");
  return EmbeddingTable(dim, std::move(vectors), policy);
}

inline EmbeddingTable load_vectors(const std::filesystem::path& path,
                                   const VocabFilter* vocab_filter = nullptr,
                                   OovPolicy policy = OovPolicy::drop, bool strict = false,
                                   VectorLoadStats* stats = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  return load_vectors(in, vocab_filter, policy, strict, stats);
}

/// Writes [vec(s); vec(v); vec(o)] into out (length 3*dim). Returns false
/// when a slot is missing under the drop policy.
inline bool embed_triple_into(const EmbeddingTable& table, const Triple& t, std::span<double> out) {
  const std::size_t d = table.dim();
  const std::string* slots[3] = {&t.subject, &t.verb, &t.object};
  for (int s = 0; s < 3; ++s) {
    const auto* v = table.find(*slots[s]);
    std::span<const double> src;
    if (v) {
      src = *v;
    } else if (table.oov_policy() == OovPolicy::mean_vector) {
      src = table.mean();
    } else {
      return false;
    }
    std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(s * d));
  }
  return true;
}

inline std::optional<std::vector<double>> embed_triple(const EmbeddingTable& table, const Triple& t) {
  std::vector<double> out(3 * table.dim());
  if (!embed_triple_into(table, t, out)) return std::nullopt;
  return out;
}

/// Dense row-major feature matrix for a labeled dataset.
struct FeatureSet {
  std::size_t width = 0;
  std::vector<double> x;
  std::vector<int> y;
  std::vector<std::size_t> source;  // index into the input examples
  std::size_t oov_dropped = 0;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * width, width);
  }
};

inline FeatureSet vectorize(const EmbeddingTable& table, std::span<const LabeledExample> examples) {
  FeatureSet fs;
  fs.width = 3 * table.dim();
  fs.x.reserve(examples.size() * fs.width);
  std::vector<double> buf(fs.width);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!embed_triple_into(table, examples[i].triple, buf)) {
      ++fs.oov_dropped;
      continue;
    }
    fs.x.insert(fs.x.end(), buf.begin(), buf.end());
    fs.y.push_back(examples[i].label);
    fs.source.push_back(i);
  }
  return fs;
}

/// Lemmas appearing in any slot of the examples; useful as a load filter.
inline VocabFilter vocabulary_of(std::span<const LabeledExample> examples) {
  VocabFilter v;
  for (const auto& e : examples) {
    v.insert(e.triple.subject);
    v.insert(e.triple.verb);
    v.insert(e.triple.object);
  }
  return v;
}

}  // namespace svo
