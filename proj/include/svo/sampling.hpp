#pragma once

// Pseudo-negative sampling and self-supervised dataset assembly.
//
// A pseudo-negative draws subject, verb and object independently from the
// store's role-occurrence tables. Draws that happen to be attested are
// rejected and redrawn, up to a cap; after the cap is exhausted the last draw
// is returned with a collision flag.
//
// RNG sub-streams: each dataset build derives independent generators for the
// positive draws, the negative draws and the final shuffle from
// derive_seed(seed, stream).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "svo/alias_table.hpp"
#include "svo/errors.hpp"
#include "svo/rng.hpp"
#include "svo/text.hpp"
#include "svo/triple_store.hpp"

namespace svo {

enum class Provenance { gold, attested, sampled };

struct LabeledExample {
  Triple triple;
  int label = 0;  // 1 plausible, 0 implausible
  Provenance provenance = Provenance::gold;
  bool collided = false;

  bool operator==(const LabeledExample&) const = default;
};

inline constexpr int kDefaultMaxAttempts = 100;

struct SampledTriple {
  Triple triple;
  bool collided = false;
  int attempts = 0;
};

class NegativeSampler {
 public:
  /// max_attempts = 0 disables rejection (a single unchecked draw).
  explicit NegativeSampler(const TripleStore& store, int max_attempts = kDefaultMaxAttempts)
      : store_(&store),
        subjects_(build_alias(store.role_freq(Role::subject))),
        verbs_(build_alias(store.role_freq(Role::verb))),
        objects_(build_alias(store.role_freq(Role::object))),
        max_attempts_(max_attempts) {}

  Triple draw(Xoshiro256& rng) const {
    Triple t;
    t.subject = subjects_.sample(rng);
    t.verb = verbs_.sample(rng);
    t.object = objects_.sample(rng);
    return t;
  }

  SampledTriple sample(Xoshiro256& rng) const {
    SampledTriple out;
    if (max_attempts_ <= 0) {
      out.triple = draw(rng);
      out.attempts = 1;
      return out;
    }
    for (int i = 0; i < max_attempts_; ++i) {
      out.triple = draw(rng);
      out.attempts = i + 1;
      if (!store_->contains(out.triple)) return out;
    }
    out.collided = true;
    return out;
  }

  /// Role tables given explicitly; `attested` is only used for rejection.
  NegativeSampler(const RoleFreq& subjects, const RoleFreq& verbs, const RoleFreq& objects,
                  const TripleStore& attested, int max_attempts = kDefaultMaxAttempts)
      : store_(&attested),
        subjects_(build_alias(subjects)),
        verbs_(build_alias(verbs)),
        objects_(build_alias(objects)),
        max_attempts_(max_attempts) {}

  const LemmaAlias& table(Role r) const {
    switch (r) {
      case Role::subject: return subjects_;
      case Role::verb: return verbs_;
      default: return objects_;
    }
  }

 private:
  const TripleStore* store_;
  LemmaAlias subjects_;
  LemmaAlias verbs_;
  LemmaAlias objects_;
  int max_attempts_;
};

enum class PositiveMode { count_weighted, unique_uniform };

struct DatasetOptions {
  int max_attempts = kDefaultMaxAttempts;
  PositiveMode positive_mode = PositiveMode::count_weighted;
};

struct DatasetStats {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t collisions_flagged = 0;
  std::size_t rejected_draws = 0;
};

struct SelfSupervisedDataset {
  std::vector<LabeledExample> examples;
  DatasetStats stats;
};

namespace stream {
inline constexpr std::uint64_t positives = 0;
inline constexpr std::uint64_t negatives = 1;
inline constexpr std::uint64_t shuffle = 2;
}  // namespace stream

/// n_positive attested triples (drawn with replacement) plus n_positive
/// pseudo-negatives, shuffled by seed.
inline SelfSupervisedDataset build_selfsupervised_dataset(const TripleStore& store,
                                                          std::size_t n_positive,
                                                          std::uint64_t seed,
                                                          const DatasetOptions& opts = {}) {
  if (n_positive == 0) throw std::invalid_argument("n_positive must be >= 1");
  if (store.empty()) throw EmptyDistribution("cannot build a dataset from an empty store");

  std::vector<Triple> unique;
  std::vector<double> weights;
  unique.reserve(store.unique_size());
  for (const auto& [t, c] : store.counts()) unique.push_back(t);
  std::sort(unique.begin(), unique.end());
  weights.reserve(unique.size());
  for (const auto& t : unique)
    weights.push_back(opts.positive_mode == PositiveMode::count_weighted
                          ? static_cast<double>(store.count(t))
                          : 1.0);
  const AliasTable positives(weights);
  const NegativeSampler sampler(store, opts.max_attempts);

  SelfSupervisedDataset ds;
  ds.examples.reserve(2 * n_positive);
  Xoshiro256 pos_rng(derive_seed(seed, stream::positives));
  for (std::size_t i = 0; i < n_positive; ++i)
    ds.examples.push_back({unique[positives.sample(pos_rng)], 1, Provenance::attested, false});

  Xoshiro256 neg_rng(derive_seed(seed, stream::negatives));
  for (std::size_t i = 0; i < n_positive; ++i) {
    auto s = sampler.sample(neg_rng);
    ds.stats.rejected_draws += static_cast<std::size_t>(s.attempts - 1);
    if (s.collided) ++ds.stats.collisions_flagged;
    ds.examples.push_back({std::move(s.triple), 0, Provenance::sampled, s.collided});
  }
  ds.stats.positives = n_positive;
  ds.stats.negatives = n_positive;

  Xoshiro256 shuf_rng(derive_seed(seed, stream::shuffle));
  shuffle(std::span<LabeledExample>(ds.examples), shuf_rng);
  return ds;
}

// Labeled dataset file: subject \t verb \t object \t label \n

inline void write_labeled_tsv(std::ostream& out, std::span<const LabeledExample> examples) {
  for (const auto& e : examples)
    out << e.triple.subject << '\t' << e.triple.verb << '\t' << e.triple.object << '\t' << e.label
        << '\n';
}

/// Reads a labeled file; every row becomes a gold example. Lemmas are
/// normalized; rows that fail normalization or are malformed throw.
inline std::vector<LabeledExample> read_labeled_tsv(std::istream& in,
                                                    Provenance provenance = Provenance::gold) {
  std::vector<LabeledExample> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::strip_cr(raw);
    if (line.empty()) continue;
    const auto cols = text::split(line, '\t');
    auto bad = [&](const std::string& why) {
      return MalformedRow("labeled row " + std::to_string(line_no) + ": " + why);
    };
    if (cols.size() != 4) throw bad("expected 4 columns");
    if (cols[3] != "0" && cols[3] != "1") throw bad("label must be 0 or 1");
    auto s = normalize_lemma(cols[0]);
    auto v = normalize_lemma(cols[1]);
    auto o = normalize_lemma(cols[2]);
    if (!s || !v || !o) throw bad("lemma outside [a-z]+");
    out.push_back({Triple{*s, *v, *o}, cols[3] == "1" ? 1 : 0, provenance, false});
  }
  return out;
}

inline void save_labeled(std::span<const LabeledExample> examples, const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + p.string());
  write_labeled_tsv(out, examples);
}

inline std::vector<LabeledExample> load_labeled(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open: " + p.string());
  return read_labeled_tsv(in);
}

}  // namespace svo
