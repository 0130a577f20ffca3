#include <doctest.h>

#include <ntx/cli.hpp>
#include <ntx/cnn.hpp>
#include <ntx/train.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace ntx;
namespace fs = std::filesystem;

namespace {

// Runs the CLI with stdout/stderr captured so test output stays readable.
int run(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::ostringstream out, err;
  std::streambuf* old_out = std::cout.rdbuf(out.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(err.rdbuf());
  int rc = -1;
  try {
    rc = run_cli(args);
  } catch (...) {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    throw;
  }
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("ntx_cli_test_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& rel) const {
    return (path / rel).string();
  }
};

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  return line;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::map<std::string, double> read_metrics(const fs::path& p) {
  std::map<std::string, double> m;
  const auto rows = lines_of(p);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto comma = rows[i].find(',');
    m[rows[i].substr(0, comma)] = std::stod(rows[i].substr(comma + 1));
  }
  return m;
}

// Copies a resolved config, pointing its `out` at a different directory.
void rewrite_out(const fs::path& src, const fs::path& dst,
                 const std::string& new_out) {
  std::ifstream in(src);
  std::ofstream out(dst);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("out=", 0) == 0)
      out << "out=\"" << new_out << "\"\n";
    else
      out << line << "\n";
  }
}

// A linearly separable sentiment corpus: label 1 documents say "superb",
// label 0 documents say "dreadful", with shared filler words.
std::string separable_corpus() {
  static const char* fill[] = {"the", "movie", "was", "plot", "acting",
                               "scenes", "a", "bit", "long", "overall"};
  std::ostringstream s;
  Rng rng(3);
  for (int i = 0; i < 16; ++i) {
    const int label = i % 2;
    s << label << '\t';
    const int len = 4 + static_cast<int>(rng.uniform() * 3);
    for (int t = 0; t < len; ++t)
      s << fill[static_cast<int>(rng.uniform() * 10)] << ' ';
    s << (label == 1 ? "superb" : "dreadful") << '\n';
  }
  return s.str();
}

std::string plain_corpus() {
  std::ostringstream s;
  static const char* word[] = {"sun", "moon", "star", "sky", "cloud", "rain"};
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const int len = 3 + static_cast<int>(rng.uniform() * 4);
    for (int t = 0; t < len; ++t)
      s << word[static_cast<int>(rng.uniform() * 6)] << ' ';
    s << '\n';
  }
  return s.str();
}

std::string copy_pairs(int n, std::uint64_t seed) {
  std::ostringstream s;
  static const char* sym[] = {"a", "b", "c", "d", "e", "f"};
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int len = 2 + static_cast<int>(rng.uniform() * 3);
    std::string line;
    for (int t = 0; t < len; ++t) {
      line += sym[static_cast<int>(rng.uniform() * 6)];
      if (t + 1 < len) line += ' ';
    }
    s << line << '\t' << line << '\n';
  }
  return s.str();
}

std::string han_corpus() {
  std::ostringstream s;
  static const char* fill[] = {"service", "was", "fine", "room", "clean"};
  Rng rng(17);
  for (int i = 0; i < 12; ++i) {
    const int label = i % 2;
    s << label << '\t';
    for (int t = 0; t < 4; ++t) s << fill[static_cast<int>(rng.uniform() * 5)]
                                   << ' ';
    s << ". " << (label == 1 ? "wonderful stay" : "terrible visit") << " .\n";
  }
  return s.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with status 2 before any work") {
  CHECK(run({}) == 2);                        // no subcommand
  CHECK(run({"conjugate"}) == 2);             // unknown subcommand
  CHECK(run({"train"}) == 2);                 // --model is required
  CHECK(run({"train", "--model", "bogus", "--corpus", "x", "--out", "y"}) ==
        2);                                   // unknown model name
  CHECK(run({"train", "--model", "cnn", "--corpus", "x", "--out", "y",
             "--frobnicate"}) == 2);          // unknown flag
  TempDir t;
  CHECK(run({"inspect", "sorcery", "--checkpoint", t.str("none.ckpt"),
             "--corpus", t.str("none.tsv")}) == 2);  // unknown inspect kind
  CHECK(run({"translate", "--checkpoint", t.str("none.ckpt")}) ==
        2);  // neither --input nor --text
  CHECK(run({"translate", "--checkpoint", t.str("none.ckpt"), "--text", "a",
             "--input", t.str("f.txt")}) == 2);  // both at once
}

TEST_CASE("a missing corpus fails cleanly without writing a checkpoint") {
  TempDir t;
  std::string err;
  const int rc = run({"train", "--model", "cnn", "--corpus",
                      t.str("absent.tsv"), "--out", t.str("run"), "--quiet"},
                     nullptr, &err);
  CHECK(rc == 2);
  CHECK(!fs::exists(t.path / "run" / "checkpoint.ckpt"));
  CHECK(err.find("error") != std::string::npos);
}

TEST_CASE("training writes checkpoint, vocabulary, log, and resolved config") {
  TempDir t;
  spit(t.path / "train.tsv", separable_corpus());
  const int rc =
      run({"train", "--model", "cnn", "--corpus", t.str("train.tsv"), "--out",
           t.str("run"), "--epochs", "2", "--d", "6", "--nf", "2", "--quiet"});
  REQUIRE(rc == 0);
  CHECK(fs::exists(t.path / "run" / "checkpoint.ckpt"));
  CHECK(fs::exists(t.path / "run" / "vocab.txt"));
  CHECK(first_line(t.path / "run" / "train_log.csv") ==
        "epoch,step,train_loss,val_loss,seconds");
  const std::string cfg = slurp(t.path / "run" / "resolved-train.cfg");
  CHECK(cfg.find("[train]") != std::string::npos);
  CHECK(cfg.find("cnn") != std::string::npos);
  CHECK(cfg.find("epochs=2") != std::string::npos);
}

TEST_CASE("a resolved config replays a run bit-identically") {
  TempDir t;
  spit(t.path / "train.tsv", separable_corpus());
  REQUIRE(run({"train", "--model", "cnn", "--corpus", t.str("train.tsv"),
               "--out", t.str("one"), "--epochs", "2", "--d", "6", "--nf",
               "2", "--seed", "21", "--quiet"}) == 0);

  rewrite_out(t.path / "one" / "resolved-train.cfg", t.path / "replay.cfg",
              t.str("two"));
  REQUIRE(run({"train", "--config", t.str("replay.cfg")}) == 0);
  CHECK(slurp(t.path / "one" / "checkpoint.ckpt") ==
        slurp(t.path / "two" / "checkpoint.ckpt"));

  // Command-line flags take precedence over the config file.
  REQUIRE(run({"train", "--config", t.str("replay.cfg"), "--out",
               t.str("three"), "--seed", "99"}) == 0);
  REQUIRE(fs::exists(t.path / "three" / "checkpoint.ckpt"));
  CHECK(slurp(t.path / "one" / "checkpoint.ckpt") !=
        slurp(t.path / "three" / "checkpoint.ckpt"));
}

TEST_CASE("convolution geometry flags land in the checkpoint") {
  TempDir t;
  spit(t.path / "train.tsv", separable_corpus());
  REQUIRE(run({"train", "--model", "cnn", "--corpus", t.str("train.tsv"),
               "--out", t.str("run"), "--regions", "2,3,4", "--nf", "2",
               "--k", "1", "--s", "7", "--d", "5", "--epochs", "1",
               "--quiet"}) == 0);
  const Checkpoint ck = load_checkpoint(t.str("run/checkpoint.ckpt"));
  CHECK(ck.model_kind == "cnn");
  CHECK(ck.hyper_value("regions") == "2,3,4");
  CHECK(ck.hyper_value("nf") == "2");
  CHECK(ck.hyper_value("k") == "1");
  CHECK(ck.hyper_value("s") == "7");
  CHECK(ck.hyper_value("d") == "5");

  // The recorded geometry reconstructs the documented feature-map lengths.
  CnnConfig cfg;
  cfg.regions = {2, 3, 4};
  cfg.nf = 2;
  cfg.k = 1;
  cfg.s = 7;
  cfg.d = 5;
  CnnModel probe = make_cnn(cfg, 10, 1);
  CHECK(probe.feature_len(0) == 6);
  CHECK(probe.feature_len(1) == 5);
  CHECK(probe.feature_len(2) == 4);
  CHECK(probe.pooled_len() == 6);
}

TEST_CASE("the same seed reproduces a training run byte for byte") {
  TempDir t;
  spit(t.path / "plain.txt", plain_corpus());
  auto train_to = [&](const std::string& out, const std::string& seed) {
    return run({"train", "--model", "gru-lm", "--corpus", t.str("plain.txt"),
                "--out", t.str(out), "--epochs", "2", "--d", "5", "--H", "6",
                "--seed", seed, "--quiet"});
  };
  REQUIRE(train_to("a", "4") == 0);
  REQUIRE(train_to("b", "4") == 0);
  REQUIRE(train_to("c", "5") == 0);
  CHECK(slurp(t.path / "a" / "checkpoint.ckpt") ==
        slurp(t.path / "b" / "checkpoint.ckpt"));
  CHECK(slurp(t.path / "a" / "vocab.txt") ==
        slurp(t.path / "b" / "vocab.txt"));
  CHECK(slurp(t.path / "a" / "checkpoint.ckpt") !=
        slurp(t.path / "c" / "checkpoint.ckpt"));
}

TEST_CASE("generation is a pure function of checkpoint and seed") {
  TempDir t;
  spit(t.path / "plain.txt", plain_corpus());
  REQUIRE(run({"train", "--model", "gru-lm", "--corpus", t.str("plain.txt"),
               "--out", t.str("lm"), "--epochs", "2", "--d", "5", "--H", "6",
               "--quiet"}) == 0);
  std::string out1, out2;
  REQUIRE(run({"generate", "--checkpoint", t.str("lm/checkpoint.ckpt"),
               "--out", t.str("g1"), "--seed", "7", "--count", "4"},
              &out1) == 0);
  REQUIRE(run({"generate", "--checkpoint", t.str("lm/checkpoint.ckpt"),
               "--out", t.str("g2"), "--seed", "7", "--count", "4"},
              &out2) == 0);
  CHECK(out1 == out2);
  CHECK(slurp(t.path / "g1" / "generated.txt") ==
        slurp(t.path / "g2" / "generated.txt"));
}

TEST_CASE("evaluation metrics are identical across worker counts") {
  TempDir t;
  spit(t.path / "plain.txt", plain_corpus());
  REQUIRE(run({"train", "--model", "lstm-lm", "--corpus", t.str("plain.txt"),
               "--out", t.str("lm"), "--epochs", "1", "--d", "5", "--H", "6",
               "--quiet"}) == 0);
  REQUIRE(run({"eval", "--checkpoint", t.str("lm/checkpoint.ckpt"),
               "--corpus", t.str("plain.txt"), "--out", t.str("e1"),
               "--eval-workers", "1"}) == 0);
  REQUIRE(run({"eval", "--checkpoint", t.str("lm/checkpoint.ckpt"),
               "--corpus", t.str("plain.txt"), "--out", t.str("e3"),
               "--eval-workers", "3"}) == 0);
  CHECK(slurp(t.path / "e1" / "metrics.csv") ==
        slurp(t.path / "e3" / "metrics.csv"));
  CHECK(first_line(t.path / "e1" / "metrics.csv") == "metric,value");
  CHECK(fs::exists(t.path / "e1" / "resolved-eval.cfg"));
}

TEST_CASE("a perfectly separable corpus scores accuracy one") {
  TempDir t;
  spit(t.path / "train.tsv", separable_corpus());
  REQUIRE(run({"train", "--model", "cnn", "--corpus", t.str("train.tsv"),
               "--out", t.str("run"), "--epochs", "40", "--d", "8", "--nf",
               "4", "--regions", "2,3", "--lr", "0.02", "--seed", "2",
               "--quiet"}) == 0);
  REQUIRE(run({"eval", "--checkpoint", t.str("run/checkpoint.ckpt"),
               "--corpus", t.str("train.tsv"), "--out", t.str("ev")}) == 0);
  const auto m = read_metrics(t.path / "ev" / "metrics.csv");
  CHECK(m.at("accuracy") == 1.0);
  CHECK(m.at("log_loss") < 0.1);
  CHECK(m.at("examples") == 16.0);
}

TEST_CASE("a vocabulary that does not match the checkpoint is rejected") {
  TempDir t;
  spit(t.path / "train.tsv", separable_corpus());
  spit(t.path / "plain.txt", plain_corpus());
  REQUIRE(run({"train", "--model", "cnn", "--corpus", t.str("train.tsv"),
               "--out", t.str("clf"), "--epochs", "1", "--d", "4", "--nf",
               "2", "--quiet"}) == 0);
  REQUIRE(run({"train", "--model", "gru-lm", "--corpus", t.str("plain.txt"),
               "--out", t.str("lm"), "--epochs", "1", "--d", "4", "--H", "4",
               "--quiet"}) == 0);
  std::string err;
  const int rc = run({"eval", "--checkpoint", t.str("clf/checkpoint.ckpt"),
                      "--corpus", t.str("train.tsv"), "--out", t.str("ev"),
                      "--vocab", t.str("lm/vocab.txt")},
                     nullptr, &err);
  CHECK(rc == 2);
  CHECK(err.find("does not match") != std::string::npos);
}

TEST_CASE("beam width one and greedy decoding agree") {
  TempDir t;
  spit(t.path / "pairs.tsv", copy_pairs(30, 1));
  spit(t.path / "inputs.txt", "c a b\nf e\nb b d\n");
  REQUIRE(run({"train", "--model", "seq2seq", "--corpus", t.str("pairs.tsv"),
               "--out", t.str("mt"), "--epochs", "2", "--d", "6", "--H", "8",
               "--seed", "3", "--quiet"}) == 0);
  std::string beam_out, greedy_out;
  REQUIRE(run({"translate", "--checkpoint", t.str("mt/checkpoint.ckpt"),
               "--input", t.str("inputs.txt"), "--out", t.str("b1"),
               "--beam", "1"},
              &beam_out) == 0);
  REQUIRE(run({"translate", "--checkpoint", t.str("mt/checkpoint.ckpt"),
               "--input", t.str("inputs.txt"), "--out", t.str("gr"),
               "--greedy"},
              &greedy_out) == 0);
  CHECK(beam_out == greedy_out);
  CHECK(slurp(t.path / "b1" / "translations.txt") ==
        slurp(t.path / "gr" / "translations.txt"));

  // Attention dumps use the documented CSV layout.
  REQUIRE(run({"translate", "--checkpoint", t.str("mt/checkpoint.ckpt"),
               "--text", "a b c", "--out", t.str("att"), "--greedy",
               "--dump-attention"}) == 0);
  CHECK(first_line(t.path / "att" / "attention_0.csv") ==
        "step,source_position,weight");
  CHECK(fs::exists(t.path / "att" / "attention_0.svg"));
}

TEST_CASE("validation loss decreases on a learnable copy task") {
  TempDir t;
  spit(t.path / "pairs.tsv", copy_pairs(40, 1));
  spit(t.path / "val.tsv", copy_pairs(10, 2));
  REQUIRE(run({"train", "--model", "seq2seq", "--corpus", t.str("pairs.tsv"),
               "--val", t.str("val.tsv"), "--out", t.str("mt"), "--epochs",
               "4", "--d", "8", "--H", "12", "--lr", "0.02", "--seed", "5",
               "--quiet"}) == 0);
  const auto rows = lines_of(t.path / "mt" / "train_log.csv");
  REQUIRE(rows.size() >= 3);  // header plus at least two epochs
  auto val_of = [](const std::string& row) {
    // epoch,step,train_loss,val_loss,seconds
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) pos = row.find(',', pos) + 1;
    return std::stod(row.substr(pos));
  };
  CHECK(val_of(rows.back()) < val_of(rows[1]));
}

TEST_CASE("gradient checks pass from the command line") {
  TempDir t;
  CHECK(run({"gradcheck", "--model", "cnn"}) == 0);
  CHECK(run({"gradcheck", "--model", "gru-lm"}) == 0);
  CHECK(run({"gradcheck", "--model", "han"}) == 0);
  std::string out;
  CHECK(run({"gradcheck", "--model", "seq2seq", "--attention", "local-p",
             "--score", "general", "--out", t.str("gc")},
            &out) == 0);
  CHECK(out.find("PASS") != std::string::npos);
  CHECK(slurp(t.path / "gc" / "gradcheck.txt").find("PASS") !=
        std::string::npos);
}

TEST_CASE("inspection artifacts use the documented layouts") {
  TempDir t;
  spit(t.path / "train.tsv", separable_corpus());
  REQUIRE(run({"train", "--model", "cnn", "--corpus", t.str("train.tsv"),
               "--out", t.str("run"), "--epochs", "3", "--d", "6", "--nf",
               "2", "--regions", "2,3", "--quiet"}) == 0);
  const std::string ckpt = t.str("run/checkpoint.ckpt");

  std::string embed_out;
  REQUIRE(run({"inspect", "embed", "--checkpoint", ckpt, "--corpus",
               t.str("train.tsv"), "--out", t.str("emb")},
              &embed_out) == 0);
  CHECK(first_line(t.path / "emb" / "embeddings.csv") == "doc_id,label,x,y");
  CHECK(fs::exists(t.path / "emb" / "embeddings.svg"));
  CHECK(embed_out.find("silhouette") != std::string::npos);

  REQUIRE(run({"inspect", "saliency", "--checkpoint", ckpt, "--corpus",
               t.str("train.tsv"), "--out", t.str("sal"), "--limit",
               "2"}) == 0);
  CHECK(first_line(t.path / "sal" / "saliency_0.csv") ==
        "doc_id,position,token,score");
  CHECK(fs::exists(t.path / "sal" / "saliency_1.svg"));

  REQUIRE(run({"inspect", "regions", "--checkpoint", ckpt, "--corpus",
               t.str("train.tsv"), "--out", t.str("reg")}) == 0);
  CHECK(first_line(t.path / "reg" / "regions.csv") ==
        "doc_id,start,h,norm,text");
}

TEST_CASE("hierarchical attention dumps use the documented layout") {
  TempDir t;
  spit(t.path / "han.tsv", han_corpus());
  REQUIRE(run({"train", "--model", "han", "--corpus", t.str("han.tsv"),
               "--out", t.str("run"), "--epochs", "2", "--d", "5", "--H",
               "4", "--quiet"}) == 0);
  REQUIRE(run({"eval", "--checkpoint", t.str("run/checkpoint.ckpt"),
               "--corpus", t.str("han.tsv"), "--out", t.str("ev"),
               "--dump-han-attention", "--limit", "2"}) == 0);
  CHECK(first_line(t.path / "ev" / "han_attention_0.csv") ==
        "sentence_idx,word_idx,token,word_alpha,sentence_alpha,product");
  CHECK(fs::exists(t.path / "ev" / "han_attention_1.csv"));
  const auto m = read_metrics(t.path / "ev" / "metrics.csv");
  CHECK(m.at("examples") == 12.0);
}

}  // TEST_SUITE
