#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support/fixtures.hpp"

using susl::testing::TempDir;
using susl::testing::scale_counts;

namespace {

const char* kCli = SUSL4TS_CLI_PATH;

int run(const std::string& args, const std::string& log = "/dev/null") {
  const std::string cmd = std::string(kCli) + " " + args + " >" + log + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// One tiny end-to-end workspace shared by the pipeline cases.
struct Pipeline {
  TempDir tmp{"cli"};
  std::string bundle;

  Pipeline() {
    susl::testing::write_ucr_fixture(tmp.path() / "raw", scale_counts(susl::testing::electric_devices_counts(), 150));
    bundle = (tmp.path() / "ed").string();
    REQUIRE(run("ingest --format ucr-tsv --input " + (tmp.path() / "raw").string() + " --output " + bundle) == 0);
  }
};

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run("--help") == 0);
  CHECK(run("frobnicate") == 1);
  CHECK(run("train") == 1);  // no data, no output dir
  CHECK(run("eval --split test") == 1);
}

TEST_CASE("missing input files exit with the data error code") {
  TempDir tmp("cli_data");
  CHECK(run("ingest --format ucr-tsv --input " + (tmp.path() / "nope").string() + " --output " +
            (tmp.path() / "b").string()) == 2);
  CHECK(run("eval --checkpoint " + (tmp.path() / "nope.ckpt").string() + " --bundle " + (tmp.path() / "b").string() +
            " --out " + (tmp.path() / "e").string()) == 2);
}

TEST_CASE("ingest writes a canonical bundle with the fixture counts") {
  Pipeline p;
  CHECK(std::filesystem::exists(p.bundle + ".meta"));
  CHECK(std::filesystem::exists(p.bundle + ".data"));
  const std::string meta = file_bytes(p.bundle + ".meta");
  CHECK(meta.find("channels=1") != std::string::npos);
  CHECK(meta.find("length=96") != std::string::npos);
  CHECK(meta.find("classes=1,2,3,4,5,6,7") != std::string::npos);
}

TEST_CASE("print-config echoes every resolved key") {
  TempDir tmp("cli_cfg");
  const std::string log = (tmp.path() / "out.txt").string();
  CHECK(run("train --print-config --lr 0.5 --hidden 1,2", log) == 0);
  const std::string text = file_bytes(log);
  CHECK(text.find("train.lr=0.5") != std::string::npos);
  CHECK(text.find("regime.hidden_classes=1,2") != std::string::npos);
  CHECK(text.find("model.variant=conv") != std::string::npos);
}

TEST_CASE("config file values are overridden by flags") {
  TempDir tmp("cli_cfg2");
  {
    std::ofstream os(tmp.path() / "exp.cfg");
    os << "# experiment file\n";
    os << "train.lr = 0.25\n";
    os << "model.latent_dim = 7\n";
  }
  const std::string log = (tmp.path() / "out.txt").string();
  CHECK(run("train --print-config --config " + (tmp.path() / "exp.cfg").string() + " --lr 0.125", log) == 0);
  const std::string text = file_bytes(log);
  CHECK(text.find("train.lr=0.125") != std::string::npos);       // flag wins
  CHECK(text.find("model.latent_dim=7") != std::string::npos);   // file value kept
}

TEST_CASE("train, eval, embed, sample and report run end to end") {
  Pipeline p;
  const std::string run_dir = (p.tmp.path() / "run").string();
  const std::string train_args = "train --bundle " + p.bundle +
                                 " --labeled-fraction 1.0 --variant mlp --latent 4 --layers 1 --units 12"
                                 " --lr 0.002 --epochs 2 --batch-size 64 --alpha 10 --seed 5 --out " +
                                 run_dir;
  REQUIRE(run(train_args) == 0);
  CHECK(std::filesystem::exists(run_dir + "/checkpoint.ckpt"));
  CHECK(std::filesystem::exists(run_dir + "/history.csv"));
  CHECK(std::filesystem::exists(run_dir + "/resolved.cfg"));
  {
    std::ifstream history(run_dir + "/history.csv");
    std::string line;
    int lines = 0;
    while (std::getline(history, line))
      if (!line.empty()) ++lines;
    CHECK(lines == 3);  // header + 2 epochs
  }

  const std::string eval_a = (p.tmp.path() / "eval_a").string();
  const std::string eval_b = (p.tmp.path() / "eval_b").string();
  REQUIRE(run("eval --run " + run_dir + " --out " + eval_a) == 0);
  REQUIRE(run("eval --run " + run_dir + " --out " + eval_b) == 0);
  for (const char* name : {"metrics.csv", "confusion_raw.csv", "confusion_mapped.csv", "cluster_map.csv",
                           "report.txt", "resolved.cfg"}) {
    CHECK(std::filesystem::exists(eval_a + "/" + name));
    CHECK(file_bytes(eval_a + "/" + name) == file_bytes(eval_b + "/" + name));  // byte-identical reruns
  }

  const std::string emb = (p.tmp.path() / "emb.csv").string();
  REQUIRE(run("embed --run " + run_dir + " --split test --out " + emb) == 0);
  CHECK(file_bytes(emb).find("id,true,pred,z_0") == 0);

  const std::string samples = (p.tmp.path() / "samples.csv").string();
  REQUIRE(run("sample --checkpoint " + run_dir + "/checkpoint.ckpt --class 2 --count 3 --seed 4 --out " + samples) ==
          0);
  CHECK(file_bytes(samples).find("sample,channel,t_0") == 0);

  const std::string report_log = (p.tmp.path() / "report.txt").string();
  REQUIRE(run("report " + eval_a + " " + eval_b, report_log) == 0);
  const std::string table = file_bytes(report_log);
  CHECK(table.find("accuracy") != std::string::npos);
  CHECK(table.find("labeled 100%") != std::string::npos);
}

TEST_CASE("unsupervised training consumes no labels") {
  Pipeline p;
  const std::string run_dir = (p.tmp.path() / "ul").string();
  REQUIRE(run("train --bundle " + p.bundle +
              " --labeled-fraction 0 --augmented 3 --variant mlp --latent 4 --layers 1 --units 12"
              " --lr 0.002 --epochs 1 --batch-size 64 --seed 5 --out " +
              run_dir) == 0);
  std::ifstream history(run_dir + "/history.csv");
  std::string header, row;
  std::getline(history, header);
  std::getline(history, row);
  // labeled_elbo and classification columns stay zero in a label-free run
  std::stringstream ss(row);
  std::string tok;
  std::getline(ss, tok, ',');  // epoch
  std::getline(ss, tok, ',');  // total
  std::getline(ss, tok, ',');
  CHECK(tok == "0");  // labeled_elbo
  std::getline(ss, tok, ',');
  CHECK(tok == "0");  // classification
}

TEST_CASE("divergence is reported with its own exit code") {
  Pipeline p;
  const std::string run_dir = (p.tmp.path() / "div").string();
  CHECK(run("train --bundle " + p.bundle +
            " --labeled-fraction 1.0 --variant mlp --latent 4 --layers 1 --units 12"
            " --lr 1e18 --clip 1e30 --epochs 3 --batch-size 64 --out " +
            run_dir) == 3);
  CHECK(std::filesystem::exists(run_dir + "/checkpoint.ckpt"));  // last good state still saved
}
