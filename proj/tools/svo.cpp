// svo: command-line driver for the triple plausibility pipeline.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "svo/conllu.hpp"
#include "svo/embeddings.hpp"
#include "svo/eval.hpp"
#include "svo/extraction.hpp"
#include "svo/mlp.hpp"
#include "svo/pipeline.hpp"
#include "svo/sampling.hpp"
#include "svo/triple_store.hpp"

namespace fs = std::filesystem;

namespace svo::cli {
namespace {

// ---------------------------------------------------------------------------
// Config resolution

std::string pointer_path(const json::json_pointer& p) { return p.to_string(); }

void check_known_keys(const json& user, const json& defaults, const json::json_pointer& at) {
  if (!user.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const auto child = at / key;
    if (!defaults.contains(key)) throw Error("unknown config key: " + pointer_path(child));
    if (defaults.at(key).is_object()) {
      if (!value.is_object()) throw Error("config key must be an object: " + pointer_path(child));
      check_known_keys(value, defaults.at(key), child);
    }
  }
}

json coerce(const json& like, const std::string& raw, const std::string& where) {
  if (like.is_string()) return raw;
  json v;
  try {
    v = json::parse(raw);
  } catch (const json::parse_error&) {
    throw Error("cannot parse value for " + where + ": " + raw);
  }
  const bool ok = (like.is_boolean() && v.is_boolean()) || (like.is_number() && v.is_number()) ||
                  (like.is_array() && v.is_array());
  if (!ok) throw Error("wrong value type for " + where + ": " + raw);
  return v;
}

json coerce_list(const json& like, const std::vector<std::string>& raw, const std::string& where) {
  json arr = json::array();
  for (const auto& r : raw) {
    if (like.is_array() && !like.empty()) arr.push_back(coerce(like.front(), r, where));
    else arr.push_back(r);
  }
  return arr;
}

struct Binding {
  json::json_pointer target;
  std::optional<std::string> value;
};

struct ListBinding {
  json::json_pointer target;
  std::vector<std::string> values;
};

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  bool strict = false;
  std::vector<std::string> sets;
  std::vector<std::unique_ptr<Binding>> bindings;
  std::vector<std::unique_ptr<ListBinding>> list_bindings;

  void bind(CLI::App* sub, const std::string& flag, const std::string& target, const std::string& help) {
    bindings.push_back(std::make_unique<Binding>(Binding{json::json_pointer(target), std::nullopt}));
    sub->add_option(flag, bindings.back()->value, help);
  }

  void bind_list(CLI::App* sub, const std::string& flag, const std::string& target, const std::string& help) {
    list_bindings.push_back(std::make_unique<ListBinding>(ListBinding{json::json_pointer(target), {}}));
    sub->add_option(flag, list_bindings.back()->values, help);
  }
};

json resolve(const Overrides& ov) {
  const json defaults = default_config();
  json cfg = defaults;
  if (ov.config) {
    const json user = load_config(*ov.config);
    if (!user.is_object()) throw Error("config file must hold a JSON object");
    check_known_keys(user, defaults, json::json_pointer());
    cfg.merge_patch(user);
  }
  for (const auto& s : ov.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw Error("--set expects key.path=value, got: " + s);
    std::string ptr = "/" + s.substr(0, eq);
    for (auto& c : ptr)
      if (c == '.') c = '/';
    const json::json_pointer p(ptr);
    if (!defaults.contains(p) || defaults.at(p).is_object()) throw Error("unknown config key: " + ptr);
    const auto raw = s.substr(eq + 1);
    cfg[p] = coerce(defaults.at(p), raw, ptr);
  }
  for (const auto& b : ov.bindings)
    if (b->value) cfg[b->target] = coerce(defaults.at(b->target), *b->value, b->target.to_string());
  for (const auto& b : ov.list_bindings)
    if (!b->values.empty()) cfg[b->target] = coerce_list(defaults.at(b->target), b->values, b->target.to_string());
  if (ov.seed) cfg["seed"] = *ov.seed;
  if (ov.out) cfg["out"] = *ov.out;
  if (ov.threads) cfg["threads"] = *ov.threads;
  if (ov.strict) cfg["strict"] = true;
  return cfg;
}

// ---------------------------------------------------------------------------
// Helpers

struct Run {
  json cfg;
  fs::path out;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool strict = false;
};

Run start_run(const json& cfg) {
  Run r;
  r.cfg = cfg;
  try {
    r.out = cfg.at("out").get<std::string>();
    r.seed = cfg.at("seed").get<std::uint64_t>();
    r.threads = cfg.at("threads").get<std::size_t>();
    r.strict = cfg.at("strict").get<bool>();
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  if (r.out.empty()) throw Error("config out must be a directory path");
  if (r.threads == 0) throw Error("config threads must be >= 1");
  fs::create_directories(r.out);
  std::ofstream f(r.out / "config.json", std::ios::binary);
  if (!f) throw Error("cannot write " + (r.out / "config.json").string());
  f << cfg.dump(2) << '\n';
  return r;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + p.string());
  return f;
}

void write_key_values(const fs::path& p, const KeyValues& kv) {
  auto f = open_out(p);
  for (const auto& [k, v] : kv) f << k << '=' << v << '\n';
}

std::string required_path(const json& cfg, const char* section, const char* key) {
  auto p = get<std::string>(cfg, section, key);
  if (p.empty()) throw Error(std::string("config ") + section + "." + key + " is required");
  return p;
}

std::string num(double d) { return text::format_double(d); }
std::string num(std::uint64_t n) { return std::to_string(n); }

struct LoadedEmbeddings {
  std::shared_ptr<const EmbeddingTable> table;
  VectorLoadStats stats;
  std::size_t vocab = 0;
  std::size_t covered = 0;
};

/// Loads the configured vectors, optionally restricted to the words the run
/// actually needs, and reports how many of those words are covered.
LoadedEmbeddings load_embeddings(const Run& run, const VocabFilter& vocab) {
  LoadedEmbeddings le;
  const auto path = required_path(run.cfg, "embeddings", "path");
  const bool restrict = get<bool>(run.cfg, "embeddings", "restrict_to_data_vocab");
  le.table = std::make_shared<const EmbeddingTable>(
      load_vectors(fs::path(path), restrict ? &vocab : nullptr, oov_policy(run.cfg), run.strict, &le.stats));
  le.vocab = vocab.size();
  for (const auto& w : vocab)
    if (le.table->contains(w)) ++le.covered;
  return le;
}

void add_coverage(KeyValues& kv, const LoadedEmbeddings& le) {
  kv.emplace_back("embedding_dim", num(std::uint64_t{le.table->dim()}));
  kv.emplace_back("vocab_size", num(std::uint64_t{le.vocab}));
  kv.emplace_back("vocab_covered", num(std::uint64_t{le.covered}));
  kv.emplace_back("vocab_coverage",
                  num(le.vocab == 0 ? 0.0 : static_cast<double>(le.covered) / static_cast<double>(le.vocab)));
}

std::vector<LabeledExample> load_gold(const std::string& path) {
  auto gold = load_labeled(path);
  if (gold.empty()) throw InsufficientData("gold file has no rows: " + path);
  return gold;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_extract(const Run& run) {
  const auto inputs = get<std::vector<std::string>>(run.cfg, "extract", "inputs");
  const auto external = get<std::vector<std::string>>(run.cfg, "extract", "external_inputs");
  if (inputs.empty() && external.empty()) throw Error("config extract.inputs is empty");
  const auto ecfg = extraction_config(run.cfg);
  const auto policy = run.strict ? IngestPolicy::strict : IngestPolicy::lenient;

  std::vector<ExtractionResult> parts(inputs.size());
  detail::parallel_for(inputs.size(), run.threads, [&](std::size_t i) {
    std::ifstream in(inputs[i], std::ios::binary);
    if (!in) throw Error("cannot open: " + inputs[i]);
    try {
      parts[i] = extract_conllu(in, ecfg, policy);
    } catch (const MalformedLine& e) {
      throw Error(inputs[i] + ":" + std::to_string(e.line()) + ": " + e.what());
    }
  });
  ExtractionResult total;
  for (const auto& p : parts) merge_into(total, p);

  IngestStats ext_stats;
  const auto min_count = get<std::uint64_t>(run.cfg, "extract", "min_count");
  for (const auto& path : external) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    merge_into(total.store, ingest_external_triples(in, min_count, &ext_stats, run.strict));
  }

  save(total.store, run.out / "triples.tsv");
  write_key_values(run.out / "extract_stats.txt",
                   {{"inputs", num(std::uint64_t{inputs.size()})},
                    {"sentences", num(total.stats.sentences)},
                    {"skipped_sentences", num(total.stats.skipped_sentences)},
                    {"triples_emitted", num(total.stats.triples_emitted)},
                    {"external_inputs", num(std::uint64_t{external.size()})},
                    {"external_rows", num(std::uint64_t{ext_stats.rows})},
                    {"external_accepted", num(std::uint64_t{ext_stats.accepted})},
                    {"external_malformed", num(std::uint64_t{ext_stats.malformed})},
                    {"external_non_alphabetic", num(std::uint64_t{ext_stats.non_alphabetic})},
                    {"external_below_min_count", num(std::uint64_t{ext_stats.below_min_count})},
                    {"unique_triples", num(std::uint64_t{total.store.unique_size()})},
                    {"cumulative_occurrences", num(total.store.total_count())}});
  if (total.stats.skipped_sentences > 0)
    std::cerr << "warning: skipped " << total.stats.skipped_sentences << " malformed sentences\n";
  return 0;
}

int cmd_build_dataset(const Run& run) {
  const auto store = load(required_path(run.cfg, "dataset", "store"));
  const auto n = get<std::size_t>(run.cfg, "dataset", "n_positive");
  if (n == 0) throw Error("config dataset.n_positive must be >= 1");
  const auto ds = build_selfsupervised_dataset(store, n, run.seed, dataset_options(run.cfg));
  save_labeled(ds.examples, run.out / "dataset.tsv");
  write_key_values(run.out / "dataset_stats.txt",
                   {{"store_unique_triples", num(std::uint64_t{store.unique_size()})},
                    {"store_cumulative_occurrences", num(store.total_count())},
                    {"rows", num(std::uint64_t{ds.examples.size()})},
                    {"positives", num(std::uint64_t{ds.stats.positives})},
                    {"negatives", num(std::uint64_t{ds.stats.negatives})},
                    {"rejected_draws", num(std::uint64_t{ds.stats.rejected_draws})},
                    {"collisions_flagged", num(std::uint64_t{ds.stats.collisions_flagged})}});
  if (ds.stats.collisions_flagged > 0)
    std::cerr << "warning: " << ds.stats.collisions_flagged
              << " negatives are attested triples (rejection cap reached)\n";
  return 0;
}

int cmd_train(const Run& run) {
  const auto data = load_labeled(required_path(run.cfg, "train", "dataset"));
  const auto tcfg = train_config(run.cfg);
  const auto le = load_embeddings(run, vocabulary_of(data));
  const FeatureSet fs = vectorize(*le.table, data);
  if (fs.size() == 0) throw InsufficientData("no training example has full embedding coverage");
  const auto result = train(fs, tcfg);
  save_checkpoint(result.params, run.out / "model.bin");
  {
    auto f = open_out(run.out / "loss.csv");
    write_loss_csv(f, result.loss_curve);
  }
  KeyValues kv{{"examples", num(std::uint64_t{data.size()})},
               {"examples_used", num(std::uint64_t{fs.size()})},
               {"examples_oov_dropped", num(std::uint64_t{fs.oov_dropped})},
               {"updates", num(std::uint64_t{result.loss_curve.size()})},
               {"first_batch_loss", result.loss_curve.empty() ? "undefined" : num(result.loss_curve.front())},
               {"last_batch_loss", result.loss_curve.empty() ? "undefined" : num(result.loss_curve.back())},
               {"train_accuracy", num(accuracy(result.params, fs))}};
  add_coverage(kv, le);
  write_key_values(run.out / "train_stats.txt", kv);
  return 0;
}

int cmd_eval(const Run& run) {
  const auto params = load_checkpoint(required_path(run.cfg, "eval", "model"));
  const auto gold = load_gold(required_path(run.cfg, "eval", "gold"));
  const auto le = load_embeddings(run, vocabulary_of(gold));
  if (le.table->dim() != params.dim)
    throw InconsistentDim("model expects " + std::to_string(params.dim) + "-d vectors, table has " +
                          std::to_string(le.table->dim()));
  const auto scored = score_examples(params, *le.table, gold);
  auto r = report(scored.predictions, scored.labels);
  r.per_example_scores = scored.scores;
  KeyValues ctx{{"examples", num(std::uint64_t{gold.size()})}, {"oov_examples", num(std::uint64_t{scored.oov})}};
  add_coverage(ctx, le);
  {
    auto f = open_out(run.out / "report.txt");
    write_report(f, r, ctx);
  }
  auto f = open_out(run.out / "predictions.tsv");
  for (std::size_t i = 0; i < gold.size(); ++i)
    f << gold[i].triple.subject << '\t' << gold[i].triple.verb << '\t' << gold[i].triple.object << '\t'
      << gold[i].label << '\t' << scored.predictions[i] << '\t' << num(scored.scores[i]) << '\n';
  return 0;
}

int cmd_cv(const Run& run) {
  const auto gold = load_gold(required_path(run.cfg, "cv", "gold"));
  CvOptions opts;
  opts.k = get<std::size_t>(run.cfg, "cv", "k");
  opts.repeats = get<std::size_t>(run.cfg, "cv", "repeats");
  opts.seed = run.seed;
  opts.threads = run.threads;
  if (opts.k < 2) throw Error("config cv.k must be >= 2");
  if (opts.repeats == 0) throw Error("config cv.repeats must be >= 1");
  const auto init = get<std::string>(run.cfg, "cv", "init_mode");
  if (init == "fixed") opts.init_mode = InitMode::fixed;
  else if (init == "per_repeat") opts.init_mode = InitMode::per_repeat;
  else throw Error("config cv.init_mode must be fixed or per_repeat");

  const auto which = get<std::string>(run.cfg, "cv", "trainer");
  KeyValues kv{{"trainer", which},
               {"examples", num(std::uint64_t{gold.size()})},
               {"k", num(std::uint64_t{opts.k})},
               {"repeats", num(std::uint64_t{opts.repeats})},
               {"init_mode", init}};
  Trainer trainer;
  if (which == "mlp") {
    const auto le = load_embeddings(run, vocabulary_of(gold));
    trainer = make_mlp_trainer(le.table, train_config(run.cfg));
    add_coverage(kv, le);
  } else if (which == "oracle") {
    trainer = make_oracle_trainer(gold);
  } else if (which == "constant") {
    trainer = make_constant_trainer(1);
  } else {
    throw Error("config cv.trainer must be mlp, oracle or constant");
  }

  const auto res = kfold_cv(gold, trainer, opts);
  std::string sizes;
  for (auto s : res.plan.fold_sizes(0)) sizes += (sizes.empty() ? "" : ",") + std::to_string(s);
  double var = 0.0;
  for (double a : res.per_repeat) var += (a - res.mean_accuracy) * (a - res.mean_accuracy);
  const double sd = res.per_repeat.size() > 1 ? std::sqrt(var / static_cast<double>(res.per_repeat.size() - 1)) : 0.0;
  const double fold_mean = std::accumulate(res.per_repeat_fold_mean.begin(), res.per_repeat_fold_mean.end(), 0.0) /
                           static_cast<double>(res.per_repeat_fold_mean.size());
  kv.emplace_back("fold_sizes", sizes);
  kv.emplace_back("mean_accuracy", num(res.mean_accuracy));
  kv.emplace_back("sd_accuracy", num(sd));
  kv.emplace_back("mean_fold_accuracy", num(fold_mean));
  write_key_values(run.out / "cv_report.txt", kv);

  auto f = open_out(run.out / "cv_repeats.csv");
  f << "repeat,pooled_accuracy,fold_mean_accuracy\n";
  for (std::size_t r = 0; r < res.per_repeat.size(); ++r)
    f << r << ',' << num(res.per_repeat[r]) << ',' << num(res.per_repeat_fold_mean[r]) << '\n';
  return 0;
}

double scored_accuracy(const MlpParams& params, const EmbeddingTable& table,
                       std::span<const LabeledExample> examples) {
  const auto s = score_examples(params, table, examples);
  return report(s.predictions, s.labels).accuracy;
}

int cmd_grid(const Run& run, std::optional<std::size_t> only_cell) {
  const auto train_set = load_labeled(required_path(run.cfg, "grid", "train_dataset"));
  const auto gold = load_gold(required_path(run.cfg, "grid", "gold"));
  const auto split = split_valid_test(gold, get<std::uint64_t>(run.cfg, "grid", "split_seed"));
  const auto axes = grid_axes(run.cfg);
  if (only_cell && *only_cell >= axes.cell_count())
    throw Error("--cell must be below " + std::to_string(axes.cell_count()));

  VocabFilter vocab = vocabulary_of(train_set);
  vocab.merge(vocabulary_of(gold));
  const auto le = load_embeddings(run, vocab);
  const FeatureSet fs = vectorize(*le.table, train_set);
  if (fs.size() == 0) throw InsufficientData("no training example has full embedding coverage");
  TrainConfig base = train_config(run.cfg);
  base.seed = run.seed;

  auto fit = [&](const TrainConfig& c) { return train(fs, c).params; };
  const CellEvaluator eval = [&](const TrainConfig& c) {
    return scored_accuracy(fit(c), *le.table, split.valid);
  };

  if (only_cell) {
    const auto cell = run_grid_cell(base, axes, *only_cell, eval);
    auto f = open_out(run.out / ("grid_cell_" + std::to_string(*only_cell) + ".csv"));
    write_grid_header(f);
    write_grid_row(f, cell);
    if (!cell.error.empty()) std::cerr << "warning: cell " << cell.index << " failed: " << cell.error << '\n';
    return 0;
  }

  const auto g = grid_search(base, axes, eval, run.threads);
  {
    auto f = open_out(run.out / "grid.csv");
    write_grid_csv(f, g);
  }
  std::size_t failed = 0;
  for (const auto& c : g.cells)
    if (!c.error.empty()) {
      ++failed;
      std::cerr << "warning: cell " << c.index << " failed: " << c.error << '\n';
    }
  KeyValues kv{{"cells", num(std::uint64_t{g.cells.size()})},
               {"failed_cells", num(std::uint64_t{failed})},
               {"train_examples", num(std::uint64_t{train_set.size()})},
               {"valid_size", num(std::uint64_t{split.valid.size()})},
               {"test_size", num(std::uint64_t{split.test.size()})}};
  add_coverage(kv, le);
  if (g.best) {
    const auto& best = g.cells[*g.best];
    kv.emplace_back("best_cell", num(std::uint64_t{best.index}));
    kv.emplace_back("best_lr", num(best.config.learning_rate));
    kv.emplace_back("best_batch", num(std::uint64_t{best.config.batch_size}));
    kv.emplace_back("best_epochs", num(best.config.epochs));
    kv.emplace_back("best_valid_accuracy", num(*best.valid_accuracy));
    kv.emplace_back("test_accuracy", num(scored_accuracy(fit(best.config), *le.table, split.test)));
  } else {
    kv.emplace_back("best_cell", "none");
  }
  write_key_values(run.out / "grid_report.txt", kv);
  return failed == g.cells.size() ? 1 : 0;
}

int cmd_topk(const Run& run) {
  const auto store = load(required_path(run.cfg, "topk", "store"));
  const auto k = get<std::size_t>(run.cfg, "topk", "k");
  std::ostringstream buf;
  for (const auto& [t, c] : top_k(store, k)) buf << t.dashed() << '\t' << c << '\n';
  std::cout << buf.str();
  return 0;
}

}  // namespace
}  // namespace svo::cli

int main(int argc, char** argv) {
  using namespace svo::cli;
  CLI::App app{"Subject-verb-object plausibility toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides ov;
  app.add_option("--config", ov.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", ov.seed, "Global seed");
  app.add_option("--out", ov.out, "Output directory");
  app.add_option("--threads", ov.threads, "Worker threads");
  app.add_flag("--strict", ov.strict, "Abort on malformed input instead of skipping");
  app.add_option("--set", ov.sets, "Override a config value: section.key=value");

  auto* extract = app.add_subcommand("extract", "Extract s-v-o triples from CoNLL-U files");
  ov.bind_list(extract, "inputs", "/extract/inputs", "CoNLL-U input files");
  ov.bind_list(extract, "--external", "/extract/external_inputs", "External s\\tv\\to\\tcount tables");
  ov.bind(extract, "--min-count", "/extract/min_count", "Minimum count for external rows");

  auto* build = app.add_subcommand("build-dataset", "Build a balanced self-supervised dataset");
  ov.bind(build, "--store", "/dataset/store", "Triple store file");
  ov.bind(build, "--n", "/dataset/n_positive", "Number of positives (and of negatives)");
  ov.bind(build, "--max-attempts", "/dataset/max_attempts", "Rejection cap per negative (0 disables)");

  auto* train_cmd = app.add_subcommand("train", "Train the embedding classifier");
  ov.bind(train_cmd, "--dataset", "/train/dataset", "Labeled training file");
  ov.bind(train_cmd, "--embeddings", "/embeddings/path", "Word vector file");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled set");
  ov.bind(eval_cmd, "--model", "/eval/model", "Checkpoint file");
  ov.bind(eval_cmd, "--gold", "/eval/gold", "Labeled evaluation file");
  ov.bind(eval_cmd, "--embeddings", "/embeddings/path", "Word vector file");

  auto* cv_cmd = app.add_subcommand("cv", "Repeated k-fold cross-validation");
  ov.bind(cv_cmd, "--gold", "/cv/gold", "Labeled gold file");
  ov.bind(cv_cmd, "--embeddings", "/embeddings/path", "Word vector file");
  ov.bind(cv_cmd, "--trainer", "/cv/trainer", "mlp, oracle or constant");

  std::optional<std::size_t> cell;
  auto* grid_cmd = app.add_subcommand("grid", "Hyperparameter grid on the validation half");
  ov.bind(grid_cmd, "--train-dataset", "/grid/train_dataset", "Self-supervised training file");
  ov.bind(grid_cmd, "--gold", "/grid/gold", "Labeled gold file split into valid/test");
  ov.bind(grid_cmd, "--embeddings", "/embeddings/path", "Word vector file");
  grid_cmd->add_option("--cell", cell, "Run a single cell and write its row");

  auto* topk_cmd = app.add_subcommand("topk", "Print the most frequent triples");
  ov.bind(topk_cmd, "--store", "/topk/store", "Triple store file");
  ov.bind(topk_cmd, "-k", "/topk/k", "Number of triples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto run = start_run(resolve(ov));
    if (*extract) return cmd_extract(run);
    if (*build) return cmd_build_dataset(run);
    if (*train_cmd) return cmd_train(run);
    if (*eval_cmd) return cmd_eval(run);
    if (*cv_cmd) return cmd_cv(run);
    if (*grid_cmd) return cmd_grid(run, cell);
    if (*topk_cmd) return cmd_topk(run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
