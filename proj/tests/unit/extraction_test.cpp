#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "svo/extraction.hpp"
#include "svo/rng.hpp"

namespace svo {
namespace {

std::string fixture(const std::string& name) { return std::string(SVO_FIXTURE_DIR) + "/" + name; }

std::vector<DepTree> load_trees(const std::string& name) {
  std::ifstream in(fixture(name));
  ConlluReader reader(in);
  std::vector<DepTree> out;
  for (const auto& t : reader) out.push_back(t);
  return out;
}

// Brute-force oracle: enumerate every (edge, edge) pair sharing a VERB head.
std::vector<Triple> enumerate_pairs(const DepTree& tree) {
  std::vector<Triple> out;
  for (const auto& v : tree.tokens) {
    if (v.upos != "VERB") continue;
    for (const auto& s : tree.tokens)
      for (const auto& o : tree.tokens) {
        if (s.head != v.id || o.head != v.id) continue;
        if (s.deprel != "nsubj" || o.deprel != "obj") continue;
        if ((s.upos != "NOUN" && s.upos != "PROPN") || (o.upos != "NOUN" && o.upos != "PROPN")) continue;
        auto a = normalize_lemma(s.lemma), b = normalize_lemma(v.lemma), c = normalize_lemma(o.lemma);
        if (a && b && c) out.push_back({*a, *b, *c});
      }
  }
  return out;
}

TEST(NormalizeLemma, Examples) {
  EXPECT_EQ(normalize_lemma("Camel"), "camel");
  EXPECT_EQ(normalize_lemma("log-in"), std::nullopt);
  EXPECT_EQ(normalize_lemma(""), std::nullopt);
  EXPECT_EQ(normalize_lemma("CEO"), "ceo");
  EXPECT_EQ(normalize_lemma("3d"), std::nullopt);
  EXPECT_EQ(normalize_lemma("caf\xc3\xa9"), std::nullopt);
}

TEST(ExtractTriples, BirdsBuildNests) {
  const auto trees = load_trees("birds.conllu");
  ASSERT_EQ(trees.size(), 1u);
  EXPECT_EQ(extract_triples(trees[0], {}), (std::vector<Triple>{{"bird", "build", "nest"}}));
}

TEST(ExtractTriples, PassiveExcludedByDefault) {
  const auto trees = load_trees("passive.conllu");
  ASSERT_EQ(trees.size(), 1u);
  EXPECT_TRUE(extract_triples(trees[0], {}).empty());
}

TEST(ExtractTriples, PassiveSubjectNeedsAnObjectEvenWhenIncluded) {
  // include_passive admits nsubj:pass as subject, but this clause has no obj.
  ExtractionConfig cfg;
  cfg.include_passive = true;
  EXPECT_TRUE(extract_triples(load_trees("passive.conllu")[0], cfg).empty());

  DepTree t{{{1, "Students", "student", "NOUN", 3, "nsubj:pass"},
             {2, "were", "be", "AUX", 3, "aux:pass"},
             {3, "given", "give", "VERB", 0, "root"},
             {4, "books", "book", "NOUN", 3, "obj"}},
            {}};
  EXPECT_TRUE(extract_triples(t, {}).empty());
  EXPECT_EQ(extract_triples(t, cfg), (std::vector<Triple>{{"student", "give", "book"}}));
}

TEST(ExtractTriples, TwoVerbSentenceMatchesEdgeEnumeration) {
  const auto trees = load_trees("alice.conllu");
  ASSERT_EQ(trees.size(), 1u);
  const auto got = extract_triples(trees[0], {});
  EXPECT_EQ(got, enumerate_pairs(trees[0]));
  // "ate" has an object but no subject edge of its own in basic dependencies.
  EXPECT_EQ(got, (std::vector<Triple>{{"alice", "give", "apple"}}));
}

TEST(ExtractTriples, AllPairsInPositionOrder) {
  DepTree t{{{1, "Cats", "cat", "NOUN", 4, "nsubj"},
             {2, ",", ",", "PUNCT", 3, "punct"},
             {3, "dogs", "dog", "NOUN", 4, "nsubj"},
             {4, "eat", "eat", "VERB", 0, "root"},
             {5, "fish", "fish", "NOUN", 4, "obj"},
             {6, "meat", "meat", "NOUN", 4, "obj"}},
            {}};
  EXPECT_EQ(extract_triples(t, {}), (std::vector<Triple>{{"cat", "eat", "fish"},
                                                         {"cat", "eat", "meat"},
                                                         {"dog", "eat", "fish"},
                                                         {"dog", "eat", "meat"}}));
}

TEST(ExtractTriples, ArgumentPosFilterAndVerbRequirement) {
  DepTree t{{{1, "Gardens", "garden", "NOUN", 2, "nsubj"},
             {2, "bloom", "bloom", "NOUN", 0, "root"},
             {3, "flowers", "flower", "NOUN", 2, "obj"}},
            {}};
  EXPECT_TRUE(extract_triples(t, {}).empty());
  ExtractionConfig relaxed;
  relaxed.require_verb_upos = false;
  EXPECT_EQ(extract_triples(t, relaxed).size(), 1u);

  DepTree pron{{{1, "He", "he", "PRON", 2, "nsubj"},
                {2, "ate", "eat", "VERB", 0, "root"},
                {3, "apples", "apple", "NOUN", 2, "obj"}},
               {}};
  EXPECT_TRUE(extract_triples(pron, {}).empty());
  ExtractionConfig with_pron;
  with_pron.allowed_arg_upos.insert("PRON");
  EXPECT_EQ(extract_triples(pron, with_pron), (std::vector<Triple>{{"he", "eat", "apple"}}));
}

TEST(ExtractTriples, NonAlphabeticCandidatesDropped) {
  DepTree t{{{1, "Covid-19", "Covid-19", "PROPN", 2, "nsubj"},
             {2, "infects", "infect", "VERB", 0, "root"},
             {3, "cells", "cell", "NOUN", 2, "obj"}},
            {}};
  EXPECT_TRUE(extract_triples(t, {}).empty());
}

std::map<Triple, std::uint64_t> oracle_multiset() {
  std::ifstream in(fixture("corpus50.expected.tsv"));
  std::map<Triple, std::uint64_t> m;
  std::string sid, s, v, o;
  while (in >> sid >> s >> v >> o) ++m[Triple{s, v, o}];
  return m;
}

TEST(ExtractCorpus, FiftySentenceFixtureMatchesOracleMultiset) {
  std::ifstream in(fixture("corpus50.conllu"));
  const auto result = extract_conllu(in, {});
  EXPECT_EQ(result.stats.sentences, 50u);
  EXPECT_EQ(result.stats.skipped_sentences, 0u);
  const auto oracle = oracle_multiset();
  std::map<Triple, std::uint64_t> got(result.store.counts().begin(), result.store.counts().end());
  EXPECT_EQ(got, oracle);
  std::uint64_t total = 0;
  for (const auto& [t, c] : oracle) total += c;
  EXPECT_EQ(result.stats.triples_emitted, total);
  EXPECT_EQ(result.store.total_count(), total);
  EXPECT_TRUE(result.store.check_invariants());
}

TEST(ExtractCorpus, EmptyStreamGivesEmptyStore) {
  std::vector<DepTree> none;
  const auto r = extract_corpus(none, {});
  EXPECT_TRUE(r.store.empty());
  EXPECT_EQ(r.stats.sentences, 0u);
}

TEST(ExtractCorpus, RepeatedTreeCounts) {
  const auto birds = load_trees("birds.conllu")[0];
  std::vector<DepTree> three(3, birds);
  const auto r = extract_corpus(three, {});
  EXPECT_EQ(r.store.count({"bird", "build", "nest"}), 3u);
  EXPECT_EQ(r.store.unique_size(), 1u);
}

TEST(ExtractCorpus, ShardedEqualsSinglePass) {
  std::ifstream whole(fixture("corpus50.conllu"));
  const auto single = extract_conllu(whole, {});
  std::ifstream s1(fixture("corpus50.shard1.conllu")), s2(fixture("corpus50.shard2.conllu"));
  auto a = extract_conllu(s1, {});
  const auto b = extract_conllu(s2, {});
  merge_into(a, b);
  EXPECT_EQ(a.store, single.store);
  EXPECT_EQ(a.stats.sentences, single.stats.sentences);
  std::ostringstream x, y;
  write_tsv(x, a.store);
  write_tsv(y, single.store);
  EXPECT_EQ(x.str(), y.str());
}

TEST(ExtractCorpus, AnyShardingAndMonotonicity) {
  const auto trees = load_trees("corpus50.conllu");
  const auto single = extract_corpus(trees, {});
  Xoshiro256 rng(11);
  for (int round = 0; round < 50; ++round) {
    const auto cut = static_cast<std::ptrdiff_t>(rng.below(trees.size() + 1));
    std::vector<DepTree> left(trees.begin(), trees.begin() + cut), right(trees.begin() + cut, trees.end());
    const auto l = extract_corpus(left, {});
    auto merged = merge(extract_corpus(right, {}).store, l.store);
    EXPECT_EQ(merged, single.store);
    for (const auto& [t, c] : l.store.counts()) EXPECT_LE(c, single.store.count(t));
  }
}

TEST(ExtractProperty, EmittedTriplesAlwaysSatisfyInvariant) {
  auto trees = load_trees("corpus50.conllu");
  const char* junk[] = {"Foo-Bar", "x1", "", "ÉCOLE", "ok", "Mixed", "a b", "_"};
  Xoshiro256 rng(99);
  for (int round = 0; round < 500; ++round) {
    auto t = trees[rng.below(trees.size())];
    for (auto& tok : t.tokens) {
      if (rng.uniform() < 0.3) tok.lemma = junk[rng.below(std::size(junk))];
      if (rng.uniform() < 0.1) tok.deprel = rng.below(2) ? "obj" : "nsubj";
      if (rng.uniform() < 0.1) tok.upos = rng.below(2) ? "VERB" : "PROPN";
    }
    for (const auto& tr : extract_triples(t, {})) ASSERT_TRUE(is_valid_triple(tr)) << tr.dashed();
  }
}

}  // namespace
}  // namespace svo
