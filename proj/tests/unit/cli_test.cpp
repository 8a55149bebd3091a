#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "svo/embeddings.hpp"
#include "svo/eval.hpp"
#include "svo/mlp.hpp"
#include "svo/sampling.hpp"
#include "svo/text.hpp"
#include "svo/triple_store.hpp"

namespace fs = std::filesystem;
using namespace svo;

namespace {

const fs::path kFixtures = SVO_FIXTURE_DIR;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') q += "'\\''";
    else q += c;
  }
  return q + "'";
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("svo_cli_test_" + std::to_string(::getpid())) / info->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_.parent_path()); }

  Result run(const std::vector<std::string>& args) const {
    std::string cmd = quote(SVO_CLI_PATH);
    for (const auto& a : args) cmd += " " + quote(a);
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  fs::path write(const std::string& name, const std::string& content) const {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

  fs::path dir_;
};

std::map<std::string, std::string> key_values(const fs::path& p) {
  std::ifstream in(p);
  return read_key_values(in);
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Gold set over the vectors10 vocabulary: 20 distinct triples, alternating labels.
std::string small_gold() {
  const char* subj[] = {"cat", "dog", "bird", "camel"};
  const char* verb[] = {"eat", "build", "ride"};
  const char* obj[] = {"grass", "nest", "camel", "the", "dog"};
  std::string s;
  int n = 0;
  for (auto* a : subj)
    for (auto* v : verb)
      for (auto* o : obj) {
        if (n >= 20) return s;
        s += std::string(a) + '\t' + v + '\t' + o + '\t' + std::to_string(n % 2) + '\n';
        ++n;
      }
  return s;
}

// Training set over the same vocabulary with a simple rule: eat+grass plausible.
std::string small_train() {
  const char* subj[] = {"cat", "dog", "bird", "camel"};
  const char* verb[] = {"eat", "build", "ride"};
  const char* obj[] = {"grass", "nest", "camel", "the"};
  std::string s;
  for (auto* a : subj)
    for (auto* v : verb)
      for (auto* o : obj) {
        const bool plausible = (std::string(v) == "eat" && std::string(o) == "grass") ||
                               (std::string(v) == "build" && std::string(o) == "nest") ||
                               (std::string(v) == "ride" && std::string(o) == "camel");
        s += std::string(a) + '\t' + v + '\t' + o + '\t' + (plausible ? "1" : "0") + '\n';
      }
  return s;
}

}  // namespace

TEST_F(CliTest, ExtractStatsMatchHandAnnotatedOracle) {
  std::ifstream oracle(kFixtures / "corpus50.expected.tsv");
  std::map<std::string, std::uint64_t> expected;
  std::uint64_t rows = 0;
  for (std::string l; std::getline(oracle, l);) {
    if (l.empty()) continue;
    const auto cols = text::split(l, '\t');
    ASSERT_EQ(cols.size(), 4u);
    ++expected[std::string(cols[1]) + "-" + std::string(cols[2]) + "-" + std::string(cols[3])];
    ++rows;
  }

  const auto out = dir_ / "out";
  const auto r = run({"--out", out.string(), "extract", (kFixtures / "corpus50.conllu").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto kv = key_values(out / "extract_stats.txt");
  EXPECT_EQ(kv.at("sentences"), "50");
  EXPECT_EQ(kv.at("skipped_sentences"), "0");
  EXPECT_EQ(kv.at("triples_emitted"), std::to_string(rows));
  EXPECT_EQ(kv.at("unique_triples"), std::to_string(expected.size()));
  EXPECT_EQ(kv.at("cumulative_occurrences"), std::to_string(rows));

  const auto store = load(out / "triples.tsv");
  std::map<std::string, std::uint64_t> got;
  for (const auto& [t, c] : store.counts()) got[t.dashed()] = c;
  EXPECT_EQ(got, expected);
  EXPECT_TRUE(fs::exists(out / "config.json"));
}

TEST_F(CliTest, ExtractWithoutInputsIsAValidationError) {
  const auto r = run({"--out", (dir_ / "out").string(), "extract"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("extract.inputs"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, ShardedExtractionEqualsSinglePass) {
  const auto single = dir_ / "single", sharded = dir_ / "sharded";
  ASSERT_EQ(run({"--out", single.string(), "extract", (kFixtures / "corpus50.conllu").string()}).code, 0);
  ASSERT_EQ(run({"--out", sharded.string(), "--threads", "2", "extract",
                 (kFixtures / "corpus50.shard1.conllu").string(), (kFixtures / "corpus50.shard2.conllu").string()})
                .code,
            0);
  EXPECT_EQ(slurp(single / "triples.tsv"), slurp(sharded / "triples.tsv"));
  const auto a = key_values(single / "extract_stats.txt"), b = key_values(sharded / "extract_stats.txt");
  for (const char* k : {"sentences", "triples_emitted", "unique_triples", "cumulative_occurrences"})
    EXPECT_EQ(a.at(k), b.at(k)) << k;
}

TEST_F(CliTest, StrictExtractionFailsOnMalformedInput) {
  const auto malformed = (kFixtures / "malformed.conllu").string();
  const auto lenient = run({"--out", (dir_ / "a").string(), "extract", malformed});
  EXPECT_EQ(lenient.code, 0) << lenient.err;
  EXPECT_NE(key_values(dir_ / "a" / "extract_stats.txt").at("skipped_sentences"), "0");
  const auto strict = run({"--out", (dir_ / "b").string(), "--strict", "extract", malformed});
  EXPECT_NE(strict.code, 0);
  EXPECT_NE(strict.err.find("malformed.conllu"), std::string::npos) << strict.err;
}

TEST_F(CliTest, BuildDatasetDegenerateStoreFlagsCollisions) {
  const auto store = write("one.tsv", "bird\tbuild\tnest\t5\n");
  const auto out = dir_ / "out";
  const auto r = run({"--out", out.string(), "build-dataset", "--store", store.string(), "--n", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_EQ(key_values(out / "dataset_stats.txt").at("collisions_flagged"), "10");
}

TEST_F(CliTest, BuildDatasetRowCountAndDeterminism) {
  const auto ex = dir_ / "ex";
  ASSERT_EQ(run({"--out", ex.string(), "extract", (kFixtures / "corpus50.conllu").string()}).code, 0);
  const auto store = (ex / "triples.tsv").string();
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run({"--out", a.string(), "--seed", "7", "build-dataset", "--store", store, "--n", "1000"}).code, 0);
  ASSERT_EQ(run({"--out", b.string(), "--seed", "7", "build-dataset", "--store", store, "--n", "1000"}).code, 0);
  const auto bytes = slurp(a / "dataset.tsv");
  EXPECT_EQ(lines(bytes).size(), 2000u);
  EXPECT_EQ(bytes, slurp(b / "dataset.tsv"));
  EXPECT_EQ(slurp(a / "dataset_stats.txt"), slurp(b / "dataset_stats.txt"));
  std::istringstream in(bytes);
  const auto rows = read_labeled_tsv(in);
  EXPECT_EQ(std::count_if(rows.begin(), rows.end(), [](const auto& e) { return e.label == 1; }), 1000);
}

TEST_F(CliTest, BuildDatasetEmptyStoreReportsError) {
  const auto store = write("empty.tsv", "");
  const auto r = run({"--out", (dir_ / "out").string(), "build-dataset", "--store", store.string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("empty"), std::string::npos) << r.err;
}

TEST_F(CliTest, CvWithOracleTrainerReportsPerfectAccuracy) {
  const auto gold = write("gold.tsv", small_gold());
  const auto out = dir_ / "out";
  const auto r = run({"--out", out.string(), "cv", "--gold", gold.string(), "--trainer", "oracle"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto kv = key_values(out / "cv_report.txt");
  EXPECT_EQ(kv.at("mean_accuracy"), "1");
  EXPECT_EQ(kv.at("k"), "10");
  EXPECT_EQ(kv.at("repeats"), "20");
  EXPECT_EQ(lines(slurp(out / "cv_repeats.csv")).size(), 21u);
}

TEST_F(CliTest, CvWithMlpTrainerRunsFromConfigFile) {
  const auto gold = write("gold.tsv", small_gold());
  const auto cfg = write("run.json", R"({"cv": {"gold": ")" + gold.string() + R"(", "repeats": 2},
    "embeddings": {"path": ")" + (kFixtures / "vectors10.txt").string() + R"("},
    "train": {"epochs": 2, "hidden": 4}})");
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run({"--config", cfg.string(), "--out", a.string(), "--threads", "3", "cv"}).code, 0);
  ASSERT_EQ(run({"--config", cfg.string(), "--out", b.string(), "cv"}).code, 0);
  EXPECT_EQ(slurp(a / "cv_report.txt"), slurp(b / "cv_report.txt"));
  EXPECT_EQ(key_values(a / "cv_report.txt").at("vocab_coverage"), "1");
}

TEST_F(CliTest, GridWithNnAxesWrites48Rows) {
  const auto gold = write("gold.tsv", small_gold());
  const auto train_set = write("train.tsv", small_train());
  const auto out = dir_ / "out";
  const std::vector<std::string> common = {"grid", "--gold", gold.string(), "--train-dataset", train_set.string(),
                                           "--embeddings", (kFixtures / "vectors10.txt").string(), "--set",
                                           "train.hidden=4"};
  auto args = std::vector<std::string>{"--out", out.string(), "--threads", "4"};
  args.insert(args.end(), common.begin(), common.end());
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(out / "grid.csv"));
  ASSERT_EQ(rows.size(), 49u);
  EXPECT_EQ(rows[0], "cell_index,lr,batch,epochs,valid_accuracy");
  EXPECT_EQ(rows[1].rfind("0,0.001,16,0.5,", 0), 0u) << rows[1];
  const auto kv = key_values(out / "grid_report.txt");
  EXPECT_EQ(kv.at("cells"), "48");
  EXPECT_EQ(kv.at("valid_size"), "10");
  EXPECT_EQ(kv.at("test_size"), "10");

  auto cell_args = std::vector<std::string>{"--out", (dir_ / "cell").string()};
  cell_args.insert(cell_args.end(), common.begin(), common.end());
  cell_args.insert(cell_args.end(), {"--cell", "29"});
  ASSERT_EQ(run(cell_args).code, 0);
  const auto cell_rows = lines(slurp(dir_ / "cell" / "grid_cell_29.csv"));
  ASSERT_EQ(cell_rows.size(), 2u);
  EXPECT_EQ(cell_rows[1], rows[30]);
}

TEST_F(CliTest, TrainThenEvalMatchesDirectReport) {
  const auto train_set = write("train.tsv", small_train());
  const auto gold = write("gold.tsv", small_gold());
  const auto vectors = kFixtures / "vectors10.txt";
  const auto tr = dir_ / "train", tr2 = dir_ / "train2", ev = dir_ / "eval";
  const std::vector<std::string> train_args = {"train", "--dataset", train_set.string(), "--embeddings",
                                               vectors.string(), "--set", "train.hidden=8", "--set",
                                               "train.epochs=5"};
  auto a1 = std::vector<std::string>{"--out", tr.string()};
  a1.insert(a1.end(), train_args.begin(), train_args.end());
  auto a2 = std::vector<std::string>{"--out", tr2.string()};
  a2.insert(a2.end(), train_args.begin(), train_args.end());
  ASSERT_EQ(run(a1).code, 0);
  ASSERT_EQ(run(a2).code, 0);
  EXPECT_EQ(slurp(tr / "model.bin"), slurp(tr2 / "model.bin"));
  EXPECT_EQ(slurp(tr / "loss.csv"), slurp(tr2 / "loss.csv"));

  const auto r = run({"--out", ev.string(), "eval", "--model", (tr / "model.bin").string(), "--gold",
                      gold.string(), "--embeddings", vectors.string()});
  ASSERT_EQ(r.code, 0) << r.err;

  const auto params = load_checkpoint(tr / "model.bin");
  const auto table = load_vectors(vectors);
  const auto examples = load_labeled(gold);
  std::vector<int> preds, labels;
  for (const auto& e : examples) {
    const auto x = embed_triple(table, e.triple);
    preds.push_back(x ? (forward(params, *x) >= 0.5 ? 1 : 0) : 1);
    labels.push_back(e.label);
  }
  const auto direct = report(preds, labels);
  std::ifstream in(ev / "report.txt");
  const auto cli = read_report(in);
  EXPECT_EQ(cli.tp, direct.tp);
  EXPECT_EQ(cli.fp, direct.fp);
  EXPECT_EQ(cli.tn, direct.tn);
  EXPECT_EQ(cli.fn, direct.fn);
  EXPECT_DOUBLE_EQ(cli.accuracy, direct.accuracy);
  EXPECT_EQ(lines(slurp(ev / "predictions.tsv")).size(), examples.size());
}

TEST_F(CliTest, TopkListsMostFrequentTriplesInOrder) {
  const auto store = write("store.tsv",
                           "male\thave\tincome\t900\n"
                           "village\thave\tpopulation\t800\n"
                           "event\ttake\tplace\t700\n"
                           "bird\tbuild\tnest\t3\n"
                           "cat\tchase\tmouse\t2\n");
  const auto out = (dir_ / "out").string();
  const auto r = run({"--out", out, "topk", "--store", store.string(), "-k", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "male-have-income\t900\nvillage-have-population\t800\nevent-take-place\t700\n");

  const auto all = run({"--out", out, "topk", "--store", store.string(), "-k", "50"});
  EXPECT_EQ(lines(all.out).size(), 5u);

  const auto none = run({"--out", out, "topk", "--store", store.string(), "-k", "0"});
  EXPECT_EQ(none.code, 0);
  EXPECT_TRUE(none.out.empty());
}

TEST_F(CliTest, ResolvedConfigRecordsOverrides) {
  const auto store = write("store.tsv", "bird\tbuild\tnest\t1\n");
  const auto out = dir_ / "out";
  ASSERT_EQ(run({"--out", out.string(), "--seed", "42", "topk", "--store", store.string(), "-k", "1"}).code, 0);
  const auto cfg = nlohmann::json::parse(slurp(out / "config.json"));
  EXPECT_EQ(cfg.at("seed"), 42);
  EXPECT_EQ(cfg.at("topk").at("k"), 1);
  EXPECT_EQ(cfg.at("topk").at("store"), store.string());
  EXPECT_EQ(cfg.at("train").at("hidden"), 100);
}

TEST_F(CliTest, UnknownConfigKeyIsRejected) {
  const auto cfg = write("bad.json", R"({"train": {"hiden": 4}})");
  const auto r = run({"--config", cfg.string(), "--out", (dir_ / "out").string(), "topk"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("/train/hiden"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingInputFileExitsNonZeroWithDiagnostic) {
  const auto r = run({"--out", (dir_ / "out").string(), "topk", "--store", (dir_ / "nope.tsv").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("nope.tsv"), std::string::npos);
}
