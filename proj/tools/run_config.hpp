#pragma once

// Run configuration: a JSON document with one section per subcommand.
// Defaults are merged under the user's file, flag overrides are merged on
// top, and the fully resolved document is written next to every output.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "svo/embeddings.hpp"
#include "svo/eval.hpp"
#include "svo/extraction.hpp"
#include "svo/mlp.hpp"
#include "svo/sampling.hpp"

namespace svo::cli {

using nlohmann::json;

inline json default_config() {
  return json::parse(R"({
    "seed": 0,
    "out": "out",
    "threads": 1,
    "strict": false,
    "extract": {
      "inputs": [],
      "external_inputs": [],
      "min_count": 5,
      "allowed_arg_upos": ["NOUN", "PROPN"],
      "require_verb_upos": true,
      "include_passive": false
    },
    "dataset": {
      "store": "",
      "n_positive": 1000,
      "max_attempts": 100,
      "positive_mode": "count_weighted"
    },
    "embeddings": {
      "path": "",
      "oov_policy": "drop",
      "restrict_to_data_vocab": true
    },
    "train": {
      "dataset": "",
      "learning_rate": 0.001,
      "batch_size": 32,
      "epochs": 20,
      "hidden": 100,
      "optimizer": "adam",
      "activation": "tanh"
    },
    "eval": {
      "model": "",
      "gold": ""
    },
    "cv": {
      "gold": "",
      "k": 10,
      "repeats": 20,
      "init_mode": "fixed",
      "trainer": "mlp"
    },
    "grid": {
      "train_dataset": "",
      "gold": "",
      "split_seed": 0,
      "learning_rates": [0.001, 0.0001, 0.00001, 0.00002],
      "batch_sizes": [16, 32, 64, 128],
      "epochs": [0.5, 1, 2]
    },
    "topk": {
      "store": "",
      "k": 10
    }
  })");
}

inline json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
}

template <typename T>
T get(const json& cfg, const char* section, const char* key) {
  try {
    return cfg.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(std::string("config ") + section + "." + key + ": " + e.what());
  }
}

inline ExtractionConfig extraction_config(const json& cfg) {
  ExtractionConfig e;
  e.allowed_arg_upos.clear();
  for (const auto& u : get<std::vector<std::string>>(cfg, "extract", "allowed_arg_upos"))
    e.allowed_arg_upos.insert(u);
  if (e.allowed_arg_upos.empty()) throw Error("config extract.allowed_arg_upos must be non-empty");
  e.require_verb_upos = get<bool>(cfg, "extract", "require_verb_upos");
  e.include_passive = get<bool>(cfg, "extract", "include_passive");
  return e;
}

inline DatasetOptions dataset_options(const json& cfg) {
  DatasetOptions o;
  o.max_attempts = get<int>(cfg, "dataset", "max_attempts");
  const auto mode = get<std::string>(cfg, "dataset", "positive_mode");
  if (mode == "count_weighted") o.positive_mode = PositiveMode::count_weighted;
  else if (mode == "unique_uniform") o.positive_mode = PositiveMode::unique_uniform;
  else throw Error("config dataset.positive_mode must be count_weighted or unique_uniform");
  return o;
}

inline OovPolicy oov_policy(const json& cfg) {
  const auto p = get<std::string>(cfg, "embeddings", "oov_policy");
  if (p == "drop") return OovPolicy::drop;
  if (p == "mean_vector") return OovPolicy::mean_vector;
  throw Error("config embeddings.oov_policy must be drop or mean_vector");
}

inline TrainConfig train_config(const json& cfg) {
  TrainConfig t;
  t.learning_rate = get<double>(cfg, "train", "learning_rate");
  t.batch_size = get<std::size_t>(cfg, "train", "batch_size");
  t.epochs = get<double>(cfg, "train", "epochs");
  t.hidden = get<std::size_t>(cfg, "train", "hidden");
  t.seed = cfg.at("seed").get<std::uint64_t>();
  const auto opt = get<std::string>(cfg, "train", "optimizer");
  if (opt == "adam") t.optimizer = Optimizer::adam;
  else if (opt == "sgd") t.optimizer = Optimizer::sgd;
  else throw Error("config train.optimizer must be adam or sgd");
  const auto act = get<std::string>(cfg, "train", "activation");
  if (act == "tanh") t.activation = Activation::tanh;
  else if (act == "relu") t.activation = Activation::relu;
  else throw Error("config train.activation must be tanh or relu");
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw Error(std::string("config train: ") + e.what());
  }
  return t;
}

inline GridAxes grid_axes(const json& cfg) {
  GridAxes a;
  a.learning_rates = get<std::vector<double>>(cfg, "grid", "learning_rates");
  a.batch_sizes = get<std::vector<std::size_t>>(cfg, "grid", "batch_sizes");
  a.epochs = get<std::vector<double>>(cfg, "grid", "epochs");
  if (a.cell_count() == 0) throw Error("config grid axes must all be non-empty");
  return a;
}

}  // namespace svo::cli
