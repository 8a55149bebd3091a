#pragma once

// Subject-verb-object extraction over Universal Dependencies trees.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "svo/conllu.hpp"
#include "svo/triple.hpp"
#include "svo/triple_store.hpp"

namespace svo {

struct ExtractionConfig {
  std::set<std::string, std::less<>> allowed_arg_upos{"NOUN", "PROPN"};
  bool require_verb_upos = true;
  bool include_passive = false;
};

/// For each predicate token, one triple per (nsubj, obj) dependent pair,
/// ordered by predicate position then subject then object position.
inline std::vector<Triple> extract_triples(const DepTree& tree, const ExtractionConfig& cfg) {
  std::vector<Triple> out;
  const auto& toks = tree.tokens;
  std::vector<const Token*> subjects;
  std::vector<const Token*> objects;
  for (const Token& pred : toks) {
    if (cfg.require_verb_upos && pred.upos != "VERB") continue;
    subjects.clear();
    objects.clear();
    for (const Token& dep : toks) {
      if (dep.head != pred.id || !cfg.allowed_arg_upos.contains(dep.upos)) continue;
      if (dep.deprel == "nsubj" || (cfg.include_passive && dep.deprel == "nsubj:pass"))
        subjects.push_back(&dep);
      else if (dep.deprel == "obj")
        objects.push_back(&dep);
    }
    if (subjects.empty() || objects.empty()) continue;
    auto verb = normalize_lemma(pred.lemma);
    if (!verb) continue;
    for (const Token* s : subjects) {
      auto subj = normalize_lemma(s->lemma);
      if (!subj) continue;
      for (const Token* o : objects) {
        auto obj = normalize_lemma(o->lemma);
        if (!obj) continue;
        out.push_back(Triple{*subj, *verb, std::move(*obj)});
      }
    }
  }
  return out;
}

struct ExtractionStats {
  std::uint64_t sentences = 0;
  std::uint64_t skipped_sentences = 0;
  std::uint64_t triples_emitted = 0;

  ExtractionStats& operator+=(const ExtractionStats& o) {
    sentences += o.sentences;
    skipped_sentences += o.skipped_sentences;
    triples_emitted += o.triples_emitted;
    return *this;
  }
};

struct ExtractionResult {
  TripleStore store;
  ExtractionStats stats;
};

/// Accumulates extract_triples over any range of DepTree.
template <typename TreeRange>
ExtractionResult extract_corpus(TreeRange&& trees, const ExtractionConfig& cfg) {
  ExtractionResult r;
  for (const DepTree& tree : trees) {
    ++r.stats.sentences;
    for (auto& t : extract_triples(tree, cfg)) {
      r.store.add(t);
      ++r.stats.triples_emitted;
    }
  }
  return r;
}

/// Streams a CoNLL-U input through the reader and extraction.
inline ExtractionResult extract_conllu(std::istream& in, const ExtractionConfig& cfg,
                                       IngestPolicy policy = IngestPolicy::lenient) {
  ConlluReader reader(in, policy);
  ExtractionResult r = extract_corpus(reader, cfg);
  r.stats.skipped_sentences = reader.sentences_skipped();
  return r;
}

inline void merge_into(ExtractionResult& dst, const ExtractionResult& src) {
  merge_into(dst.store, src.store);
  dst.stats += src.stats;
}

}  // namespace svo
