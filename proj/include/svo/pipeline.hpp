#pragma once

// Glue between the classifier and the evaluation harness.

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "svo/embeddings.hpp"
#include "svo/eval.hpp"
#include "svo/mlp.hpp"
#include "svo/sampling.hpp"

namespace svo {

/// Trainer backed by the embedding classifier. Training examples with an OOV
/// slot (drop policy) are skipped; at prediction time such triples receive
/// the tie label (plausible).
inline Trainer make_mlp_trainer(std::shared_ptr<const EmbeddingTable> table, TrainConfig cfg) {
  return [table = std::move(table), cfg](std::span<const LabeledExample> train_set,
                                         std::uint64_t init_seed) -> Predictor {
    TrainConfig c = cfg;
    c.seed = init_seed;
    const FeatureSet fs = vectorize(*table, train_set);
    auto params = std::make_shared<const MlpParams>(train(fs, c).params);
    return [table, params](const Triple& t) {
      auto p = predict(*params, *table, t);
      return p ? p->label : 1;
    };
  };
}

/// Debug trainer that knows every gold label in advance.
inline Trainer make_oracle_trainer(std::span<const LabeledExample> all) {
  auto labels = std::make_shared<std::map<Triple, int>>();
  for (const auto& e : all) (*labels)[e.triple] = e.label;
  return [labels](std::span<const LabeledExample>, std::uint64_t) -> Predictor {
    return [labels](const Triple& t) {
      auto it = labels->find(t);
      return it == labels->end() ? 1 : it->second;
    };
  };
}

inline Trainer make_constant_trainer(int label) {
  return [label](std::span<const LabeledExample>, std::uint64_t) -> Predictor {
    return [label](const Triple&) { return label; };
  };
}

struct Scored {
  std::vector<int> predictions;
  std::vector<int> labels;
  std::vector<double> scores;
  std::size_t oov = 0;
};

/// Scores every example; OOV triples get the tie label and score 0.5.
inline Scored score_examples(const MlpParams& params, const EmbeddingTable& table,
                             std::span<const LabeledExample> examples) {
  Scored s;
  for (const auto& e : examples) {
    auto p = predict(params, table, e.triple);
    if (!p) {
      ++s.oov;
      p = classify(0.5);
    }
    s.predictions.push_back(p->label);
    s.scores.push_back(p->probability);
    s.labels.push_back(e.label);
  }
  return s;
}

inline EvalReport evaluate(const MlpParams& params, const EmbeddingTable& table,
                           std::span<const LabeledExample> examples) {
  auto s = score_examples(params, table, examples);
  auto r = report(s.predictions, s.labels);
  r.per_example_scores = std::move(s.scores);
  return r;
}

}  // namespace svo
