#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "starqa/cli.hpp"
#include "starqa/config.hpp"
#include "starqa/errors.hpp"
#include "starqa/io.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = starqa::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("starqa_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  CliRun in_dir(std::vector<std::string> args) {
    args.insert(args.begin(), {"--data-dir", dir.string()});
    return cli(std::move(args));
  }

  void ingest_fixture() {
    const auto r = in_dir({"ingest", "--json", starqa::testing::fixture("www2023_mini.tree.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir;
};

}  // namespace

TEST_F(CliTest, FullPipeline) {
  ingest_fixture();
  ASSERT_TRUE(fs::exists(starqa::cli::tree_file(dir, "WWW2023")));

  auto r = in_dir({"stats", "WWW2023"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("WWW2023\t"), std::string::npos);

  ASSERT_EQ(in_dir({"flatten", "--conference", "WWW2023"}).code, 0);
  const auto paths = starqa::io::read_file(starqa::cli::paths_file(dir, "WWW2023"));
  EXPECT_NE(paths.find("WWW2023>>Attendees>>Registration>>Register Fee>>Virtual Conference>>ACM Members>>$300\n"),
            std::string::npos);

  r = in_dir({"describe", "--conference", "WWW2023", "--concurrency", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(in_dir({"index", "--conference", "WWW2023", "--mode", "path_text"}).code, 0);
  ASSERT_EQ(in_dir({"index", "--conference", "WWW2023", "--mode", "description_text"}).code, 0);

  const auto record_file = dir / "record.json";
  r = in_dir({"ask", "--conference", "WWW2023", "--explain", "--record", record_file.string(),
              "How much is virtual registration for ACM members?"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ACM Members>>$300"), std::string::npos) << r.out;
  const auto record = json::parse(starqa::io::read_file(record_file));
  EXPECT_EQ(record["retrieved"]["config"]["k"], 5);

  r = in_dir({"eval", "--pairs", starqa::testing::fixture("www2023_mini.pairs.jsonl").string(), "--modes",
              "dense_path,dense_description,bm25_path,bm25_description"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(starqa::io::read_file(dir / "eval.json"));
  EXPECT_EQ(report["cells"].size(), 16u);
  EXPECT_EQ(report["deltas"].size(), 8u);
  EXPECT_EQ(report["judge"]["kind"], "fallback");
  EXPECT_EQ(starqa::io::read_file(dir / "eval.txt"), r.out.substr(0, r.out.find("wrote ")));
}

TEST_F(CliTest, IngestHtmlAndNested) {
  auto r = in_dir({"ingest", "--html", starqa::testing::fixture("conference_page.html").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(starqa::cli::tree_file(dir, "ISWC2022")));

  const auto nested = dir / "nested.json";
  starqa::io::write_file_atomic(nested, R"({"Program": {"Venue": "Hangzhou"}})");
  r = in_dir({"ingest", "--nested", nested.string(), "--conference", "ISWC2023"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = in_dir({"stats", "ISWC2023"});
  EXPECT_NE(r.out.find("ISWC2023\t1\t4.00\t3.00\t4"), std::string::npos) << r.out;
}

TEST_F(CliTest, ErrorsAreStructured) {
  auto r = in_dir({"ask", "--conference", "NOPE", "question?"});
  EXPECT_EQ(r.code, 1);
  const auto err = json::parse(r.err);
  EXPECT_EQ(err["error"]["kind"], "not_found");

  r = cli({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["error"]["kind"], "usage");

  r = cli({});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["error"]["kind"], "usage");

  r = cli({"--show-config"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["run"]["k"], 5);

  r = cli({"ask", "--k", "0", "--conference", "X", "q"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err)["error"]["kind"], "config");
}

TEST_F(CliTest, DescriptionRetrieverWithoutStore) {
  ingest_fixture();
  ASSERT_EQ(in_dir({"flatten", "--conference", "WWW2023"}).code, 0);
  auto r = in_dir({"ask", "--conference", "WWW2023", "--retriever", "dense_description", "fee?"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err)["error"]["kind"], "config");
  r = in_dir({"ask", "--conference", "WWW2023", "--retriever", "bm25_path", "research track page limit"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "12 pages\n");
}

TEST_F(CliTest, StaleArtifactsRejected) {
  ingest_fixture();
  ASSERT_EQ(in_dir({"flatten", "--conference", "WWW2023"}).code, 0);
  ASSERT_EQ(in_dir({"index", "--conference", "WWW2023", "--mode", "path_text"}).code, 0);
  // Rewrite the paths file with one path removed: the index no longer matches.
  auto paths = starqa::io::read_file(starqa::cli::paths_file(dir, "WWW2023"));
  paths.erase(0, paths.find('\n') + 1);
  starqa::io::write_file_atomic(starqa::cli::paths_file(dir, "WWW2023"), paths);
  const auto r = in_dir({"ask", "--conference", "WWW2023", "fee"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err)["error"]["kind"], "mismatch");
}

TEST_F(CliTest, ConfigFileAndOverrides) {
  const auto ini = dir / "starqa.ini";
  starqa::io::write_file_atomic(ini,
                                "[provider]\nbase_url = http://localhost:9/v1\nmax_retries = 1\ntimeout = 2.5\n"
                                "[run]\nk = 7\nretriever = bm25_path\n");
  auto r = cli({"--config", ini.string(), "--show-config", "--data-dir", dir.string(), "stats", "--tree",
                starqa::testing::fixture("www2023_mini.tree.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto shown = json::parse(r.out.substr(0, r.out.find("conference\t")));
  EXPECT_EQ(shown["provider"]["base_url"], "http://localhost:9/v1");
  EXPECT_EQ(shown["provider"]["timeout_s"], 2.5);
  EXPECT_EQ(shown["run"]["k"], 7);
  EXPECT_EQ(shown["run"]["retriever"], "bm25_path");
  EXPECT_EQ(r.out.find("sk-"), std::string::npos);

  const auto cfg = starqa::load_run_config(ini);
  EXPECT_EQ(cfg.retriever.k, 7u);
  EXPECT_EQ(cfg.provider.max_retries, 1);

  starqa::io::write_file_atomic(ini, "[provider]\napi_key = sk-secret\n");
  EXPECT_THROW(starqa::load_run_config(ini), starqa::ConfigError);
  starqa::io::write_file_atomic(ini, "[run]\nretreiver = bm25_path\n");
  EXPECT_THROW(starqa::load_run_config(ini), starqa::ConfigError);
}
