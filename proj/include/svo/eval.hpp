#pragma once

// Evaluation protocols: repeated k-fold cross-validation, valid/test splits,
// exhaustive grid search and confusion-based reports.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "svo/errors.hpp"
#include "svo/mlp.hpp"
#include "svo/rng.hpp"
#include "svo/sampling.hpp"
#include "svo/text.hpp"

namespace svo {

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  std::optional<double> fp_share_of_errors;  // FP / (FP + FN); unset with no errors
  std::vector<double> per_example_scores;

  std::size_t total() const { return tp + fp + tn + fn; }
  std::size_t errors() const { return fp + fn; }
};

inline EvalReport report(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw LengthMismatch("predictions and labels differ in length");
  if (predictions.empty()) throw std::invalid_argument("report needs at least one prediction");
  EvalReport r;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] == 1, gold = labels[i] == 1;
    if (pred && gold) ++r.tp;
    else if (pred && !gold) ++r.fp;
    else if (!pred && !gold) ++r.tn;
    else ++r.fn;
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.total());
  if (r.errors() > 0)
    r.fp_share_of_errors = static_cast<double>(r.fp) / static_cast<double>(r.errors());
  return r;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// key=value lines: caller-supplied context first, then the report fields.
inline void write_report(std::ostream& out, const EvalReport& r, const KeyValues& context = {}) {
  for (const auto& [k, v] : context) out << k << '=' << v << '\n';
  out << "accuracy=" << text::format_double(r.accuracy) << '\n';
  out << "tp=" << r.tp << '\n' << "fp=" << r.fp << '\n' << "tn=" << r.tn << '\n' << "fn=" << r.fn << '\n';
  out << "fp_share="
      << (r.fp_share_of_errors ? text::format_double(*r.fp_share_of_errors) : std::string("undefined"))
      << '\n';
}

inline std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto l = text::strip_cr(line);
    if (l.empty() || l.front() == '#') continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) throw FormatError("report line without '=': " + std::string(l));
    kv[std::string(l.substr(0, eq))] = std::string(l.substr(eq + 1));
  }
  return kv;
}

inline EvalReport read_report(std::istream& in) {
  const auto kv = read_key_values(in);
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("report missing key ") + key);
    return it->second;
  };
  auto count = [&](const char* key) {
    auto v = text::parse_int<std::size_t>(get(key));
    if (!v) throw FormatError(std::string("bad count for ") + key);
    return *v;
  };
  EvalReport r;
  r.tp = count("tp");
  r.fp = count("fp");
  r.tn = count("tn");
  r.fn = count("fn");
  auto acc = text::parse_double(get("accuracy"));
  if (!acc) throw FormatError("bad accuracy");
  r.accuracy = *acc;
  const auto& share = get("fp_share");
  if (share != "undefined") {
    auto s = text::parse_double(share);
    if (!s) throw FormatError("bad fp_share");
    r.fp_share_of_errors = *s;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Fold plans and cross-validation

struct FoldPlan {
  std::size_t k = 0;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::uint32_t>> assignments;  // [repeat][example] -> fold

  std::vector<std::size_t> fold_sizes(std::size_t repeat) const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto f : assignments[repeat]) ++sizes[f];
    return sizes;
  }
};

/// Repeat r shuffles indices with derive_seed(seed, r) and cuts the
/// permutation into k contiguous blocks; the first n % k blocks get one extra.
inline FoldPlan make_fold_plan(std::size_t n, std::size_t k, std::size_t repeats, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (n < k) throw InsufficientData("fewer examples than folds");
  FoldPlan plan{k, repeats, seed, {}};
  plan.assignments.resize(repeats);
  const std::size_t base = n / k, extra = n % k;
  std::vector<std::uint32_t> perm(n);
  for (std::size_t r = 0; r < repeats; ++r) {
    std::iota(perm.begin(), perm.end(), 0u);
    Xoshiro256 rng(derive_seed(seed, r));
    shuffle(std::span<std::uint32_t>(perm), rng);
    auto& assign = plan.assignments[r];
    assign.assign(n, 0);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t size = base + (f < extra ? 1 : 0);
      for (std::size_t i = 0; i < size; ++i) assign[perm[pos++]] = static_cast<std::uint32_t>(f);
    }
  }
  return plan;
}

using Predictor = std::function<int(const Triple&)>;
/// Trains on the given examples; init_seed controls model initialization.
using Trainer = std::function<Predictor(std::span<const LabeledExample> train, std::uint64_t init_seed)>;

enum class InitMode { fixed, per_repeat };

struct CvOptions {
  std::size_t k = 10;
  std::size_t repeats = 20;
  std::uint64_t seed = 0;
  InitMode init_mode = InitMode::fixed;
  std::size_t threads = 1;
};

struct CvResult {
  double mean_accuracy = 0.0;
  std::vector<double> per_repeat;            // pooled over the repeat's folds
  std::vector<double> per_repeat_fold_mean;  // unweighted mean of fold accuracies
  std::vector<std::vector<std::size_t>> fold_correct;  // [repeat][fold]
  FoldPlan plan;
};

inline std::uint64_t init_seed_for_repeat(const CvOptions& o, std::size_t repeat) {
  return o.init_mode == InitMode::fixed ? o.seed : derive_seed(o.seed ^ 0x5eedULL, repeat);
}

namespace detail {

// Runs task(i) for i in [0, count) on up to `threads` workers; the first
// exception is rethrown after all workers stop.
template <typename Task>
void parallel_for(std::size_t count, std::size_t threads, Task&& task) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

inline CvResult kfold_cv(std::span<const LabeledExample> gold, const Trainer& trainer,
                         const CvOptions& opts = {}) {
  if (gold.size() < opts.k) throw InsufficientData("fewer gold examples than folds");
  CvResult res;
  res.plan = make_fold_plan(gold.size(), opts.k, opts.repeats, opts.seed);
  res.fold_correct.assign(opts.repeats, std::vector<std::size_t>(opts.k, 0));

  detail::parallel_for(opts.repeats * opts.k, opts.threads, [&](std::size_t task) {
    const std::size_t r = task / opts.k, f = task % opts.k;
    const auto& assign = res.plan.assignments[r];
    std::vector<LabeledExample> train;
    train.reserve(gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i)
      if (assign[i] != f) train.push_back(gold[i]);
    const Predictor predict = trainer(train, init_seed_for_repeat(opts, r));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i)
      if (assign[i] == f && predict(gold[i].triple) == gold[i].label) ++correct;
    res.fold_correct[r][f] = correct;
  });

  for (std::size_t r = 0; r < opts.repeats; ++r) {
    const auto sizes = res.plan.fold_sizes(r);
    std::size_t correct = 0;
    double fold_mean = 0.0;
    for (std::size_t f = 0; f < opts.k; ++f) {
      correct += res.fold_correct[r][f];
      fold_mean += static_cast<double>(res.fold_correct[r][f]) / static_cast<double>(sizes[f]);
    }
    res.per_repeat.push_back(static_cast<double>(correct) / static_cast<double>(gold.size()));
    res.per_repeat_fold_mean.push_back(fold_mean / static_cast<double>(opts.k));
  }
  if (!res.per_repeat.empty())
    res.mean_accuracy = std::accumulate(res.per_repeat.begin(), res.per_repeat.end(), 0.0) /
                        static_cast<double>(res.per_repeat.size());
  return res;
}

struct ValidTestSplit {
  std::vector<LabeledExample> valid;
  std::vector<LabeledExample> test;
};

/// Shuffles by seed; first half validation, second half test.
inline ValidTestSplit split_valid_test(std::span<const LabeledExample> gold, std::uint64_t seed) {
  if (gold.size() % 2 != 0) throw OddSize("gold set size must be even");
  std::vector<std::size_t> idx(gold.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Xoshiro256 rng(seed);
  shuffle(std::span<std::size_t>(idx), rng);
  ValidTestSplit s;
  const std::size_t half = gold.size() / 2;
  for (std::size_t i = 0; i < gold.size(); ++i) (i < half ? s.valid : s.test).push_back(gold[idx[i]]);
  return s;
}

// ---------------------------------------------------------------------------
// Grid search

struct GridAxes {
  std::vector<double> learning_rates;
  std::vector<std::size_t> batch_sizes;
  std::vector<double> epochs;

  std::size_t cell_count() const { return learning_rates.size() * batch_sizes.size() * epochs.size(); }
};

/// Self-supervised grid for the embedding classifier.
inline GridAxes nn_grid() { return {{1e-3, 1e-4, 1e-5, 2e-5}, {16, 32, 64, 128}, {0.5, 1, 2}}; }

/// Fine-tuning grid used by the transformer classifier.
inline GridAxes transformer_grid() { return {{1e-5, 2e-5, 3e-5}, {8, 16}, {0.5, 1, 2}}; }

/// Cell `index` in learning-rate-major order, seeded with derive_seed(base.seed, index).
inline TrainConfig grid_cell_config(const TrainConfig& base, const GridAxes& axes, std::size_t index) {
  if (index >= axes.cell_count()) throw std::out_of_range("grid cell index out of range");
  const std::size_t ne = axes.epochs.size(), nb = axes.batch_sizes.size();
  TrainConfig cfg = base;
  cfg.learning_rate = axes.learning_rates[index / (nb * ne)];
  cfg.batch_size = axes.batch_sizes[(index / ne) % nb];
  cfg.epochs = axes.epochs[index % ne];
  cfg.seed = derive_seed(base.seed, index);
  return cfg;
}

struct GridCell {
  std::size_t index = 0;
  TrainConfig config;
  std::optional<double> valid_accuracy;
  std::string error;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::optional<std::size_t> best;
};

/// Cell evaluation: trains under cfg and returns validation accuracy.
using CellEvaluator = std::function<double(const TrainConfig&)>;

inline GridCell run_grid_cell(const TrainConfig& base, const GridAxes& axes, std::size_t index,
                              const CellEvaluator& eval) {
  GridCell cell{index, grid_cell_config(base, axes, index), std::nullopt, {}};
  try {
    cell.valid_accuracy = eval(cell.config);
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

inline GridResult grid_search(const TrainConfig& base, const GridAxes& axes, const CellEvaluator& eval,
                              std::size_t threads = 1) {
  if (axes.cell_count() == 0) throw std::invalid_argument("grid axes must be non-empty");
  GridResult res;
  res.cells.resize(axes.cell_count());
  detail::parallel_for(res.cells.size(), threads,
                       [&](std::size_t i) { res.cells[i] = run_grid_cell(base, axes, i, eval); });
  for (const auto& c : res.cells) {
    if (!c.valid_accuracy) continue;
    if (!res.best || *c.valid_accuracy > *res.cells[*res.best].valid_accuracy) res.best = c.index;
  }
  return res;
}

inline void write_grid_header(std::ostream& out) { out << "cell_index,lr,batch,epochs,valid_accuracy\n"; }

inline void write_grid_row(std::ostream& out, const GridCell& c) {
  out << c.index << ',' << text::format_double(c.config.learning_rate) << ',' << c.config.batch_size
      << ',' << text::format_double(c.config.epochs) << ','
      << (c.valid_accuracy ? text::format_double(*c.valid_accuracy) : std::string("error")) << '\n';
}

inline void write_grid_csv(std::ostream& out, const GridResult& g) {
  write_grid_header(out);
  for (const auto& c : g.cells) write_grid_row(out, c);
}

}  // namespace svo
