#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "cprdraft/cpr.hpp"
#include "cprdraft/dataio.hpp"
#include "cprdraft/nn.hpp"
#include "test_support.hpp"

namespace cprdraft::cli {
namespace {

using testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("CPRDRAFT_MODEL_DIR"); }
  void TearDown() override { unsetenv("CPRDRAFT_MODEL_DIR"); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Result gen(std::size_t drafts, const std::string& out, double noise = 0.01) {
    return run_cli({"gen", "--db", path("cards.txt"), "--synthetic-cards", "30", "--drafts",
                    std::to_string(drafts), "--seed", "5", "--noise", std::to_string(noise),
                    "--out", path(out)});
  }

  TempDir dir_;
};

TEST_F(CliTest, GenReportsEventAndTripletCounts) {
  const Result r = gen(100, "log.jsonl");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("wrote 100 drafts (36000 pick events, 252000 triplets)"),
            std::string::npos)
      << r.out;
  EXPECT_EQ(load_draft_log(path("log.jsonl")).size(), 100u);
  EXPECT_TRUE(std::filesystem::exists(path("log.jsonl.oracle.json")));
  const auto manifest = nlohmann::json::parse(read_file(path("log.jsonl.manifest.json")));
  EXPECT_EQ(manifest["command"], "gen");
  EXPECT_EQ(manifest["seed"], 5);
  EXPECT_TRUE(manifest.contains("started_at"));
  EXPECT_TRUE(manifest.contains("config"));
}

TEST_F(CliTest, GenIsDeterministic) {
  ASSERT_EQ(gen(3, "a.jsonl").code, 0);
  ASSERT_EQ(gen(3, "b.jsonl").code, 0);
  EXPECT_EQ(read_file(path("a.jsonl")), read_file(path("b.jsonl")));
}

TEST_F(CliTest, GenZeroDraftsWritesHeaderOnly) {
  ASSERT_EQ(gen(0, "empty.jsonl").code, 0);
  EXPECT_EQ(read_file(path("empty.jsonl")), draft_log_header() + "\n");
}

TEST_F(CliTest, TrainIsReproducible) {
  ASSERT_EQ(gen(4, "log.jsonl").code, 0);
  auto train = [&](const std::string& out) {
    return run_cli({"train", "--db", path("cards.txt"), "--log", path("log.jsonl"), "--out",
                    path(out), "--seed", "3", "--dim", "4", "--hidden", "16",
                    "--validation-events", "200", "--validate-every", "2000"});
  };
  const Result a = train("a.cprm");
  ASSERT_EQ(a.code, 0) << a.err;
  const Result b = train("b.cprm");
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(nn::load_model_file(path("a.cprm")).params, nn::load_model_file(path("b.cprm")).params);
  EXPECT_NE(a.out.find("checksum"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(path("a.cprm.txt")));
  EXPECT_TRUE(std::filesystem::exists(path("a.cprm.history.csv")));
  EXPECT_TRUE(std::filesystem::exists(path("a.cprm.manifest.json")));
  EXPECT_EQ(read_file(path("a.cprm.validation.csv")).substr(0, 14), "triplets,mtta\n");
}

TEST_F(CliTest, NoiseFreeOracleIsPerfectOnItsOwnLog) {
  ASSERT_EQ(gen(2, "log.jsonl", 0.0).code, 0);
  const Result r = run_cli({"evaluate", "--db", path("cards.txt"), "--log", path("log.jsonl"),
                            "--agent", "oracle", "--agent", "random", "--oracle",
                            path("log.jsonl.oracle.json"), "--partition", "all", "--out",
                            path("eval")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string summary = read_file(path("eval.summary.csv"));
  EXPECT_NE(summary.find("oracle,720,1,0\n"), std::string::npos) << summary;
  EXPECT_TRUE(std::filesystem::exists(path("eval.0-oracle.per_pick.csv")));
  EXPECT_TRUE(std::filesystem::exists(path("eval.1-random.per_pick.csv")));
}

TEST_F(CliTest, RankListsCardsByDistanceWithFooter) {
  ASSERT_EQ(gen(3, "log.jsonl").code, 0);
  ASSERT_EQ(run_cli({"train", "--db", path("cards.txt"), "--log", path("log.jsonl"), "--out",
                     path("m.cprm"), "--dim", "4", "--hidden", "8", "--validate-every", "0"})
                .code,
            0);
  const Result r = run_cli({"rank", "--db", path("cards.txt"), "--model", path("m.cprm"), "--log",
                            path("log.jsonl"), "--embeddings-out", path("emb.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "rank,card_id,name,colors,rarity,distance_to_empty");
  double previous = -1.0;
  int rows = 0;
  while (std::getline(in, line) && line[0] != '#') {
    const double d = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_GE(d, previous);
    previous = d;
    ++rows;
  }
  EXPECT_EQ(rows, 30);
  EXPECT_EQ(line.rfind("# kendall_tau(first_pick_rate, -distance_to_empty) = ", 0), 0u) << line;
  const std::string emb = read_file(path("emb.csv"));
  EXPECT_EQ(std::count(emb.begin(), emb.end(), '\n'), 31);
}

TEST_F(CliTest, SimulatedLogTrainsNnet) {
  ASSERT_EQ(gen(1, "seed.jsonl").code, 0);
  const Result sim = run_cli({"simulate", "--db", path("cards.txt"), "--agent", "raredraft",
                              "--agent", "random", "--agent", "raredraft", "--agent", "random",
                              "--agent", "random", "--agent", "random", "--agent", "random",
                              "--agent", "oracle", "--oracle", path("seed.jsonl.oracle.json"),
                              "--drafts", "3", "--out", path("sim.jsonl")});
  ASSERT_EQ(sim.code, 0) << sim.err;
  EXPECT_EQ(load_draft_log(path("sim.jsonl")).size(), 3u);
  const Result tr = run_cli({"train", "--kind", "nnet", "--db", path("cards.txt"), "--log",
                             path("sim.jsonl"), "--out", path("n.cprm"), "--hidden", "8"});
  ASSERT_EQ(tr.code, 0) << tr.err;
  const Result ev = run_cli({"evaluate", "--db", path("cards.txt"), "--log", path("sim.jsonl"),
                             "--agent", "nnet=" + path("n.cprm")});
  EXPECT_EQ(ev.code, 0) << ev.err;
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"bogus"}).code, 1);
  EXPECT_EQ(run_cli({"--version"}).code, 0);
  const Result missing = run_cli({"evaluate", "--db", path("none.txt"), "--log", path("none.jsonl"),
                                  "--agent", "random"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("error:"), std::string::npos);
  ASSERT_EQ(gen(1, "log.jsonl").code, 0);
  EXPECT_EQ(run_cli({"evaluate", "--db", path("cards.txt"), "--log", path("log.jsonl"), "--agent",
                     "wizard"})
                .code,
            1);
}

TEST_F(CliTest, ConfigFileSuppliesDefaults) {
  std::ofstream(path("gen.ini")) << "[gen]\ndrafts=2\nseed=5\nnoise=0.01\n";
  const Result r = run_cli({"--config", path("gen.ini"), "gen", "--db", path("cards.txt"),
                            "--synthetic-cards", "30", "--out", path("cfg.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(gen(2, "flags.jsonl").code, 0);
  EXPECT_EQ(read_file(path("cfg.jsonl")), read_file(path("flags.jsonl")));
}

TEST_F(CliTest, ModelDirectoryEnvironment) {
  ASSERT_EQ(gen(2, "log.jsonl").code, 0);
  std::filesystem::create_directories(dir_ / "models");
  setenv("CPRDRAFT_MODEL_DIR", path("models").c_str(), 1);
  ASSERT_EQ(run_cli({"train", "--db", path("cards.txt"), "--log", path("log.jsonl"), "--out",
                     "env.cprm", "--dim", "2", "--hidden", "4", "--validate-every", "0"})
                .code,
            0);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "models" / "env.cprm"));
  const Result r = run_cli({"rank", "--db", path("cards.txt"), "--model", "env.cprm"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, SweepWritesOneRowPerDimension) {
  ASSERT_EQ(gen(3, "log.jsonl").code, 0);
  const Result r = run_cli({"sweep", "--db", path("cards.txt"), "--log", path("log.jsonl"),
                            "--dims", "2,4", "--seeds", "1", "--hidden", "8", "--max-triplets",
                            "500", "--out", path("sweep.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = read_file(path("sweep.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.rfind("dimension,mean_mtta,seeds,mtta_per_seed\n2,", 0), 0u) << csv;
}

}  // namespace
}  // namespace cprdraft::cli
