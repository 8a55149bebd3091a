#pragma once

// Walker/Vose alias method: O(n) construction, O(1) draws.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svo/errors.hpp"
#include "svo/rng.hpp"
#include "svo/triple_store.hpp"

namespace svo {

class AliasTable {
 public:
  AliasTable() = default;

  explicit AliasTable(std::span<const double> weights) {
    if (weights.empty()) throw EmptyDistribution("alias table needs at least one weight");
    const std::size_t n = weights.size();
    double sum = 0.0;
    for (double w : weights) {
      if (!(w > 0.0) || !std::isfinite(w))
        throw EmptyDistribution("alias table weights must be positive and finite");
      sum += w;
    }
    prob_.assign(n, 1.0);
    alias_.resize(n);
    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      alias_[i] = static_cast<std::uint32_t>(i);
      scaled[i] = weights[i] * static_cast<double>(n) / sum;
      (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
    }
    while (!small.empty() && !large.empty()) {
      const auto s = small.back();
      small.pop_back();
      const auto l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers on either stack are 1 up to rounding.
    for (auto i : large) prob_[i] = 1.0;
    for (auto i : small) prob_[i] = 1.0;
  }

  std::size_t size() const { return prob_.size(); }
  std::span<const double> prob() const { return prob_; }
  std::span<const std::uint32_t> alias() const { return alias_; }

  std::size_t sample(Xoshiro256& rng) const {
    const auto column = static_cast<std::size_t>(rng.below(prob_.size()));
    return rng.uniform() < prob_[column] ? column : alias_[column];
  }

  /// Probability of each index implied by the table.
  std::vector<double> implied_distribution() const {
    const auto n = static_cast<double>(prob_.size());
    std::vector<double> p(prob_.size(), 0.0);
    for (std::size_t i = 0; i < prob_.size(); ++i) {
      p[i] += prob_[i] / n;
      p[alias_[i]] += (1.0 - prob_[i]) / n;
    }
    return p;
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// Alias table over lemmas, items in lexicographic order.
struct LemmaAlias {
  std::vector<std::string> items;
  AliasTable table;

  const std::string& sample(Xoshiro256& rng) const { return items[table.sample(rng)]; }
};

inline LemmaAlias build_alias(const RoleFreq& weights) {
  if (weights.empty()) throw EmptyDistribution("empty role frequency table");
  LemmaAlias out;
  std::vector<double> w;
  out.items.reserve(weights.size());
  w.reserve(weights.size());
  for (const auto& [lemma, count] : weights) {
    out.items.push_back(lemma);
    w.push_back(static_cast<double>(count));
  }
  out.table = AliasTable(w);
  return out;
}

}  // namespace svo
