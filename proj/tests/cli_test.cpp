#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "medctx/cli.hpp"

namespace medctx {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "medctx");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_command(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "medctx_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    detail::write_file(root_ / "tiny.cfg",
                       "# small model\nlayers = 1\nhidden_dim=16\nheads=2\nffn_dim=32\nmax_len=64\nmax_epochs=2\n");
    ASSERT_EQ(run({"synth", "--seed", "7", "--out", p("d"), "--train-docs", "12", "--dev-docs", "4", "--test-docs",
                   "4"})
                  .code,
              0);
    ASSERT_EQ(run({"train", "--task", "all", "--data", p("d"), "--model", p("m"), "--config", p("tiny.cfg")}).code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }
  static std::string p(std::string_view rel) { return (root_ / rel).string(); }

  static fs::path root_;
};
fs::path Cli::root_;

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"train", "--task", "ner"}).code, 2);
  EXPECT_EQ(run({"train", "--data", p("d")}).code, 2);
  EXPECT_EQ(run({"train", "--task", "dosage", "--data", p("d")}).code, 2);
  EXPECT_EQ(run({"train", "--task", "ner", "--data", p("d"), "--bogus", "1"}).code, 2);
  EXPECT_EQ(run({"train", "--task", "ner", "--data", p("d"), "--heads", "3"}).code, 2);
  EXPECT_EQ(run({"train", "--task", "ner", "--data", p("d"), "--learning-rate", "fast"}).code, 2);
  EXPECT_EQ(run({"evaluate", "--task", "ner", "--data", p("d"), "--model", p("m"), "--mode", "fuzzy"}).code, 2);
  EXPECT_EQ(run({"evaluate", "--task", "ner", "--data", p("d"), "--model", p("m"), "--gold-spans", "maybe"}).code,
            2);
  EXPECT_EQ(run({"synth"}).code, 2);
  EXPECT_EQ(run({"stats", "--config", p("missing.cfg"), "--data", p("d")}).code, 2);
  detail::write_file(root_ / "bad.cfg", "wat=1\n");
  EXPECT_EQ(run({"stats", "--config", p("bad.cfg"), "--data", p("d")}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, RuntimeErrorsExitOne) {
  EXPECT_EQ(run({"stats", "--data", p("nowhere")}).code, 1);
  EXPECT_EQ(run({"evaluate", "--task", "ner", "--data", p("d"), "--model", p("nowhere")}).code, 1);
  EXPECT_EQ(run({"pipeline", "--model", p("m"), "--in", p("nowhere.txt"), "--out", p("x.jsonl")}).code, 1);
}

TEST_F(Cli, EmptyNoteGivesEmptyPredictions) {
  detail::write_file(root_ / "note.txt", "");
  const auto r = run({"pipeline", "--model", p("m"), "--in", p("note.txt"), "--out", p("preds.jsonl")});
  EXPECT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(root_ / "preds.jsonl"));
  EXPECT_EQ(fs::file_size(root_ / "preds.jsonl"), 0u);
}

TEST_F(Cli, PipelineOverDirectoryMatchesPredictAll) {
  fs::create_directories(root_ / "notes");
  const auto c = load_corpus(root_ / "d");
  for (const auto& d : c.test) detail::write_file(root_ / "notes" / (d.doc_id + ".txt"), utf8::encode(d.text));
  ASSERT_EQ(run({"pipeline", "--model", p("m"), "--in", p("notes"), "--out", p("dir.jsonl")}).code, 0);
  ASSERT_EQ(run({"predict", "--data", p("d"), "--model", p("m"), "--out", p("all.jsonl")}).code, 0);
  EXPECT_EQ(detail::read_file(root_ / "dir.jsonl"), detail::read_file(root_ / "all.jsonl"));
}

TEST_F(Cli, EvaluateEveryTaskAndSetting) {
  for (std::string task : {"ner", "event", "context", "end2end"})
    for (std::string gold : {"on", "off"})
      for (std::string mode : {"strict", "lenient"}) {
        const auto out = p("metrics_" + task + gold + mode + ".jsonl");
        const auto r = run({"evaluate", "--task", task, "--data", p("d"), "--model", p("m"), "--gold-spans", gold,
                            "--mode", mode, "--out", out});
        EXPECT_EQ(r.code, 0) << task << " " << gold << " " << r.err;
        EXPECT_NE(r.err.find(task), std::string::npos);
        EXPECT_GT(fs::file_size(out), 0u);
      }
}

TEST_F(Cli, StatsAndGradcheckWriteToStdout) {
  const auto s = run({"stats", "--data", p("d")});
  EXPECT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("Disposition"), std::string::npos);
  const auto g = run({"gradcheck", "--samples", "40"});
  EXPECT_EQ(g.code, 0) << g.out << g.err;
  EXPECT_NE(g.out.find("token"), std::string::npos);
  EXPECT_NE(g.out.find("sequence"), std::string::npos);
}

TEST_F(Cli, TrainingTwiceGivesIdenticalArtifacts) {
  ASSERT_EQ(run({"train", "--task", "negation", "--data", p("d"), "--model", p("m2"), "--config", p("tiny.cfg")}).code,
            0);
  for (auto f : {kManifestFile, kParamsFile})
    EXPECT_EQ(detail::read_file(root_ / "m2" / "negation" / f), detail::read_file(root_ / "m" / "negation" / f));
}

TEST(RunConfig, FlagsWinOverConfigFile) {
  RunConfig c;
  apply_config_text(c, "seed=5\nhidden_dim = 64\n\n# note\nlearning_rate=0.01\ndifficulty=noisy\n");
  EXPECT_EQ(c.encoder.hidden_dim, 64u);
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.encoder.seed, 5u);
  EXPECT_EQ(c.train.seed, 5u);
  EXPECT_EQ(c.synth.seed, 5u);
  EXPECT_EQ(c.synth.difficulty, Difficulty::Noisy);
  set_config_key(c, "hidden_dim", "32");
  EXPECT_EQ(c.encoder.hidden_dim, 32u);
  EXPECT_THROW(apply_config_text(c, "no equals sign\n"), UsageError);
  EXPECT_THROW(apply_config_text(c, "layers=-1\n"), UsageError);
  EXPECT_THROW(set_config_key(c, "precision", "f16"), UsageError);
}

}  // namespace
}  // namespace medctx
