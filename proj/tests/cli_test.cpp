#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "valb/corpus.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "valb_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  // Runs the binary with `args`; stdout and stderr land in out_ / err_.
  int run(const std::string& args) {
    const std::string cmd = std::string(VALB_CLI_PATH) + " " + args + " >" + path("stdout") +
                            " 2>" + path("stderr");
    const int status = std::system(cmd.c_str());
    out_ = slurp(path("stdout"));
    err_ = slurp(path("stderr"));
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  static void write(const std::string& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
  }

  // The last JSON diagnostic on stderr.
  json last_diagnostic() const {
    std::istringstream in(err_);
    std::string line, last;
    while (std::getline(in, line))
      if (!line.empty() && line[0] == '{') last = line;
    return json::parse(last);
  }

  static inline fs::path dir_;
  std::string out_, err_;
};

}  // namespace

TEST_F(Cli, SynthSplitTrainTagParseEval) {
  ASSERT_EQ(run("synth --seed 5 --templates 6 --logs 200 --out " + path("all.txt")), 0) << err_;
  const auto spec = json::parse(slurp(path("all.txt.spec.json")));
  EXPECT_EQ(spec.at("templates").size(), 6u);
  EXPECT_EQ(valb::read_annotations(path("all.txt")).size(), 200u);

  ASSERT_EQ(run("split --input " + path("all.txt") + " --ratios 0.3,0.2,0.5 --out-dir " +
                path("split")),
            0)
      << err_;
  EXPECT_EQ(valb::read_annotations(path("split/train.txt")).size(), 60u);
  EXPECT_EQ(valb::read_annotations(path("split/val.txt")).size(), 40u);
  EXPECT_EQ(valb::read_annotations(path("split/test.txt")).size(), 100u);
  EXPECT_TRUE(fs::exists(path("split/run-config.txt")));

  ASSERT_EQ(run("train --train " + path("split/train.txt") + " --val " + path("split/val.txt") +
                " --out " + path("m.valb") + " --epochs 2 --hidden 16 --word-dim 8" +
                " --char-emb-dim 8 --char-filters 4 --history " + path("hist.json")),
            0)
      << err_;
  const auto hist = json::parse(slurp(path("hist.json")));
  ASSERT_TRUE(hist.is_object());
  EXPECT_TRUE(fs::exists(path("m.valb")));

  const auto test = valb::read_annotations(path("split/test.txt"));
  std::string raw;
  for (const auto& l : test) raw += valb::join_tokens(l.tokens) + "\n";
  write(path("raw.txt"), raw + "\n");  // trailing blank line is skipped with a warning

  ASSERT_EQ(run("tag --model " + path("m.valb") + " --input " + path("raw.txt") + " --output " +
                path("pred.txt")),
            0)
      << err_;
  const auto pred = valb::read_annotations(path("pred.txt"));
  ASSERT_EQ(pred.size(), test.size());
  for (std::size_t i = 0; i < test.size(); ++i) EXPECT_EQ(pred[i].tokens, test[i].tokens);

  ASSERT_EQ(run("parse --model " + path("m.valb") + " --input " + path("raw.txt") +
                " --preserve OID,TDA --output " + path("parsed.jsonl") + " --templates " +
                path("templates.json")),
            0)
      << err_;
  std::istringstream lines(slurp(path("parsed.jsonl")));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j.at("line_no"), n + 1);
    EXPECT_TRUE(j.contains("canonical_template"));
    ++n;
  }
  EXPECT_EQ(n, test.size());
  const auto templates = json::parse(slurp(path("templates.json")));
  std::size_t total = 0;
  for (const auto& t : templates.at("templates")) total += t.at("count").get<std::size_t>();
  EXPECT_EQ(total, test.size());

  ASSERT_EQ(run("eval --gold " + path("split/test.txt") + " --pred " + path("pred.txt") +
                " --report " + path("report.json")),
            0)
      << err_;
  const auto report = json::parse(slurp(path("report.json")));
  EXPECT_EQ(report.at("logs"), test.size());
  EXPECT_NE(out_.find("variable-aware accuracy"), std::string::npos);

  ASSERT_EQ(run("finetune --model " + path("m.valb") + " --train " + path("split/val.txt") +
                " --val " + path("split/val.txt") + " --out " + path("ft.valb") + " --epochs 1"),
            0)
      << err_;
  EXPECT_TRUE(fs::exists(path("ft.valb")));
}

TEST_F(Cli, EvalOnFixture) {
  const auto [pred, gold] = fixtures::four_logs();
  valb::write_annotations(pred, path("fx_pred.txt"));
  valb::write_annotations(gold, path("fx_gold.txt"));
  ASSERT_EQ(run("eval --gold " + path("fx_gold.txt") + " --pred " + path("fx_pred.txt") +
                " --report " + path("fx.json")),
            0)
      << err_;
  const auto r = json::parse(slurp(path("fx.json")));
  EXPECT_DOUBLE_EQ(r.at("general_accuracy").get<double>(), 0.75);
  EXPECT_DOUBLE_EQ(r.at("variable_aware_accuracy").get<double>(), 0.5);
  EXPECT_EQ(r.at("prf_level"), "span");
  ASSERT_EQ(run("eval --gold " + path("fx_gold.txt") + " --pred " + path("fx_pred.txt") +
                " --token-level --report " + path("fx_tok.json")),
            0);
  EXPECT_EQ(json::parse(slurp(path("fx_tok.json"))).at("prf_level"), "token");
}

TEST_F(Cli, TokenMismatchIsAnError) {
  const auto [pred, gold] = fixtures::four_logs();
  auto bad = pred;
  bad[2].tokens[0] = "Closed";
  valb::write_annotations(bad, path("mm_pred.txt"));
  valb::write_annotations(gold, path("mm_gold.txt"));
  EXPECT_EQ(run("eval --gold " + path("mm_gold.txt") + " --pred " + path("mm_pred.txt")), 1);
  const auto d = last_diagnostic();
  EXPECT_EQ(d.at("kind"), "TokenMismatch");
  EXPECT_EQ(d.at("log_index"), 2);
}

TEST_F(Cli, MalformedAnnotationsReportTheLine) {
  write(path("bad.txt"), "a\tO\nb\tB-NOPE\n");
  EXPECT_EQ(run("split --input " + path("bad.txt") + " --out-dir " + path("bad")), 1);
  const auto d = last_diagnostic();
  EXPECT_EQ(d.at("line"), 2);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("train --train " + path("nope.txt") + " --val x --out y"), 2);
  EXPECT_EQ(last_diagnostic().at("kind"), "UsageError");
  write(path("tiny.txt"), "a\tO\n\nb\tO\n\nc\tO\n\nd\tO\n\ne\tO\n");
  EXPECT_EQ(run("split --input " + path("tiny.txt") + " --ratios 0.5,0.5,0.5"), 2);
  EXPECT_EQ(run("split --input " + path("tiny.txt") + " --ratios 0.5,x,0.5"), 2);
  EXPECT_EQ(run("synth --logs 10 --templates 20 --out " + path("s.txt")), 1);
}

TEST_F(Cli, ParseRejectsUnknownCategory) {
  ASSERT_EQ(run("synth --seed 2 --templates 5 --logs 60 --out " + path("p.txt")), 0);
  ASSERT_EQ(run("train --train " + path("p.txt") + " --val " + path("p.txt") + " --out " +
                path("p.valb") + " --epochs 1 --hidden 8 --word-dim 4 --char-emb-dim 4" +
                " --char-filters 2"),
            0)
      << err_;
  write(path("p_raw.txt"), "a b c\n");
  EXPECT_EQ(run("parse --model " + path("p.valb") + " --input " + path("p_raw.txt") +
                " --preserve OID,BOGUS --output " + path("p.jsonl")),
            2);
  EXPECT_NE(last_diagnostic().at("message").get<std::string>().find("OTP"), std::string::npos);
  EXPECT_EQ(run("parse --model " + path("p.valb") + " --input " + path("p_raw.txt") +
                " --output " + path("p.jsonl") + " --wildcard 'a b'"),
            2);
}

TEST_F(Cli, BinaryModeTrainsOnCategoryGold) {
  ASSERT_EQ(run("synth --seed 3 --templates 5 --logs 60 --out " + path("b.txt")), 0);
  ASSERT_EQ(run("train --mode binary --train " + path("b.txt") + " --val " + path("b.txt") +
                " --out " + path("b.valb") + " --epochs 1 --hidden 8 --word-dim 4" +
                " --char-emb-dim 4 --char-filters 2"),
            0)
      << err_;
  write(path("b_raw.txt"), "a b c\n");
  EXPECT_EQ(run("parse --model " + path("b.valb") + " --input " + path("b_raw.txt") +
                " --preserve OID --output " + path("b.jsonl")),
            1);
  EXPECT_EQ(last_diagnostic().at("kind"), "ModeError");
  EXPECT_EQ(run("parse --model " + path("b.valb") + " --input " + path("b_raw.txt") +
                " --output " + path("b.jsonl")),
            0);
}

TEST_F(Cli, CorruptModelIsReported) {
  write(path("junk.valb"), "VALB not really a model");
  write(path("j_raw.txt"), "a\n");
  EXPECT_EQ(run("tag --model " + path("junk.valb") + " --input " + path("j_raw.txt") +
                " --output " + path("j.txt")),
            1);
  EXPECT_EQ(last_diagnostic().at("kind"), "ChecksumError");
}
