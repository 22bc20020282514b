#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "mixtrack/cli.hpp"
#include "mixtrack/config.hpp"
#include "mixtrack/error.hpp"
#include "mixtrack/textio.hpp"
#include "mixtrack/traffic.hpp"

namespace fs = std::filesystem;
using namespace mixtrack;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mixtrack");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("mixtrack_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path write_scenario() const {
    const auto p = path("scenario.ini");
    spit(p,
         "[scenario]\nfps = 25\nduration_s = 120\ninterval_s = 60\nseed = 3\nn_agents = 8\n"
         "embedding_dim = 8\nembedding_noise = 0.05\nnoise_px = 0.5\nmiss_prob = 0.02\n");
    return p;
  }

  // A few boxes of classes 0 to 3 spread over the first frames.
  fs::path write_ground_truth() const {
    const auto p = path("gt.txt");
    std::string text;
    for (int f = 1; f <= 40; ++f)
      for (int k = 0; k < 4; ++k) text += std::to_string(f) + "," + std::to_string(200 * k) + ",500,60,40," + std::to_string(k) + "\n";
    spit(p, text);
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, PrintConfigRoundTrips) {
  const auto r = invoke({"print-config"});
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  const auto cfg = config::load_run_config(in, "printed");
  std::ostringstream again;
  config::write_run_config(again, cfg);
  EXPECT_EQ(again.str(), r.out);
  EXPECT_NE(r.out.find("t1 = 9.4877"), std::string::npos);
  EXPECT_NE(r.out.find("max_age = 3"), std::string::npos);
  EXPECT_EQ(invoke({"--print-config"}).out, r.out);
}

TEST_F(CliTest, EverySubcommandIsDeterministic) {
  const auto spec = write_scenario();
  for (const char* run : {"a", "b"}) {
    const auto d = path(run);
    ASSERT_EQ(invoke({"synth", "--spec", spec.string(), "--out-dir", d.string()}).code, 0);
    ASSERT_EQ(invoke({"track", "--detections", (d / "detections.txt").string(), "--config", (d / "run.ini").string(),
                      "--out-dir", (d / "out").string()})
                  .code,
              0);
    ASSERT_EQ(invoke({"eval", "--pred", (d / "detections.txt").string(), "--gt", write_ground_truth().string(),
                      "--out-dir", (d / "eval").string()})
                  .code,
              0);
    ASSERT_EQ(invoke({"stats", "--measured", (d / "out" / "intervals.txt").string(), "--truth",
                      (d / "ground_truth.txt").string(), "--out-dir", (d / "stats").string()})
                  .code,
              0);
  }
  for (const char* f : {"detections.txt", "ground_truth.txt", "agents.txt", "run.ini", "out/tracks.txt",
                        "out/intervals.txt", "eval/eval.txt", "eval/confusion.txt", "stats/stats.txt"}) {
    const auto a = slurp(path("a") / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(path("b") / f)) << f;
  }
}

TEST_F(CliTest, SeedOverrideChangesOutput) {
  const auto spec = write_scenario();
  ASSERT_EQ(invoke({"synth", "--spec", spec.string(), "--out-dir", path("a").string()}).code, 0);
  ASSERT_EQ(invoke({"synth", "--spec", spec.string(), "--seed", "4", "--out-dir", path("b").string()}).code, 0);
  EXPECT_NE(slurp(path("a/detections.txt")), slurp(path("b/detections.txt")));
}

TEST_F(CliTest, EmptyDetectionsGiveEmptyOutputs) {
  spit(path("empty.txt"), "");
  ASSERT_EQ(invoke({"track", "--detections", path("empty.txt").string(), "--out-dir", path("out").string()}).code, 0);
  EXPECT_EQ(slurp(path("out/tracks.txt")), "frame\tid\tclass\tu\tv\tw\th\n");
  std::ifstream in(path("out/intervals.txt"));
  EXPECT_TRUE(traffic::read_intervals(in).empty());

  spit(path("cfg.ini"), "[measure]\nduration_s = 120\n");
  ASSERT_EQ(invoke({"track", "--detections", path("empty.txt").string(), "--config", path("cfg.ini").string(),
                    "--out-dir", path("out2").string()})
                .code,
            0);
  std::ifstream in2(path("out2/intervals.txt"));
  const auto rows = traffic::read_intervals(in2);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.count, 0);
    EXPECT_EQ(r.flow_vph, 0.0);
    EXPECT_EQ(r.class_id, traffic::IntervalRow::kNoClass);
  }
}

TEST_F(CliTest, IntervalTimingUsesFrameRate) {
  std::string dets;
  for (int f = 1; f <= 100; ++f) dets += std::to_string(f) + ",100," + std::to_string(100 + f) + ",20,20,1,0\n";
  spit(path("d.txt"), dets);
  spit(path("cfg.ini"), "[measure]\ninterval_s = 1\nfps = 25\n");
  ASSERT_EQ(invoke({"track", "--detections", path("d.txt").string(), "--config", path("cfg.ini").string(), "--out-dir",
                    path("out").string()})
                .code,
            0);
  std::ifstream in(path("out/intervals.txt"));
  const auto rows = traffic::read_intervals(in);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].start_s, static_cast<double>(i));
    EXPECT_EQ(rows[i].end_s, static_cast<double>(i + 1));
  }
}

TEST_F(CliTest, EvalPerfectAndEmptyPredictions) {
  spit(path("gt.txt"), "1,0,0,20,20,0\n1,100,0,20,20,1\n2,0,100,20,20,1\n");
  spit(path("pred.txt"), "1,0,0,20,20,1,0\n1,100,0,20,20,1,1\n2,0,100,20,20,1,1\n");
  spit(path("classes.txt"), "car\nbus\n");
  auto r = invoke({"eval", "--pred", path("pred.txt").string(), "--gt", path("gt.txt").string(), "--classes",
                   path("classes.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("0\tcar\t1\t1\t1\t0\t0\t1\t1\t1\t1\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("1\tbus\t2\t2\t2\t0\t0\t1\t1\t1\t1\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("car\t1\t0\n"), std::string::npos);
  EXPECT_NE(r.out.find("bus\t0\t1\n"), std::string::npos);

  spit(path("none.txt"), "");
  r = invoke({"eval", "--pred", path("none.txt").string(), "--gt", path("gt.txt").string(), "--classes",
              path("classes.txt").string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("all\tmAP@0.5\t3\t0\t0\t0\t3\t0\t0\t0\t0\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvalApFixture) {
  // Ranked [TP, FP, TP] against two ground truths.
  spit(path("gt.txt"), "1,0,0,20,20,0\n1,100,0,20,20,0\n");
  spit(path("pred.txt"), "1,0,0,20,20,0.9,0\n1,300,0,20,20,0.8,0\n1,100,0,20,20,0.7,0\n");
  spit(path("classes.txt"), "car\n");
  const auto r = invoke({"eval", "--pred", path("pred.txt").string(), "--gt", path("gt.txt").string(), "--classes",
                         path("classes.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\t0.833333\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvalVocabularyMismatch) {
  spit(path("gt.txt"), "1,0,0,20,20,5\n");
  spit(path("pred.txt"), "");
  spit(path("classes.txt"), "car\n");
  const auto r = invoke({"eval", "--pred", path("pred.txt").string(), "--gt", path("gt.txt").string(), "--classes",
                         path("classes.txt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("outside the class list"), std::string::npos);
}

TEST_F(CliTest, StatsOnKnownSeries) {
  const auto header = std::string("interval\tt_start_s\tt_end_s\tclass\tcount\tflow_vph\tmean_speed_kmh\tn_speed_tracks\n");
  const double a[] = {1, 2, 3, 4}, b[] = {2, 2, 4, 4};
  std::string m = header, t = header;
  for (int i = 0; i < 4; ++i) {
    const auto pre = std::to_string(i) + "\t" + std::to_string(60 * i) + "\t" + std::to_string(60 * (i + 1)) + "\t0\t";
    m += pre + "1\t" + textio::format_exact(a[i]) + "\t" + textio::format_exact(a[i]) + "\t1\n";
    t += pre + "1\t" + textio::format_exact(b[i]) + "\t" + textio::format_exact(a[i]) + "\t1\n";
  }
  spit(path("m.txt"), m);
  spit(path("t.txt"), t);
  auto r = invoke({"stats", "--measured", path("m.txt").string(), "--truth", path("t.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("flow_vph\t0\t4\t0.707107\t0.894427\t-1.73205\t0.18169\t3\t-0.5\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("speed_kmh\t0\t4\t0\t1\t0\t1\t3\t0\n"), std::string::npos) << r.out;

  r = invoke({"stats", "--measured", path("m.txt").string(), "--truth", path("m.txt").string()});
  EXPECT_NE(r.out.find("flow_vph\t0\t4\t0\t1\t0\t1\t3\t0\n"), std::string::npos) << r.out;

  spit(path("short.txt"), header + "0\t0\t60\t0\t1\t1\t1\t1\n");
  r = invoke({"stats", "--measured", path("m.txt").string(), "--truth", path("short.txt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("length mismatch"), std::string::npos) << r.err;
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(invoke({"--help"}).code, 0);
  EXPECT_EQ(invoke({"track"}).code, 1);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  auto r = invoke({"track", "--detections", path("missing.txt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("mixtrack: error: ", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);

  spit(path("bad.txt"), "1,0,0,20,20,1,0\n2,0,0,abc,20,1,0\n");
  r = invoke({"track", "--detections", path("bad.txt").string(), "--out-dir", path("out").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find(":2"), std::string::npos) << r.err;

  spit(path("bad.ini"), "[tracking]\nmax_age = -1\n");
  r = invoke({"track", "--detections", path("missing.txt").string(), "--config", path("bad.ini").string()});
  EXPECT_EQ(r.code, 1);

  spit(path("bad_spec.ini"), "[scenario]\nfps = -1\n");
  EXPECT_EQ(invoke({"synth", "--spec", path("bad_spec.ini").string(), "--out-dir", path("s").string()}).code, 1);
}

TEST_F(CliTest, BinaryReadsStandardInput) {
  const char* bin = std::getenv("MIXTRACK_BIN");
  if (!bin) GTEST_SKIP() << "MIXTRACK_BIN not set";
  std::string dets;
  for (int f = 1; f <= 10; ++f) dets += std::to_string(f) + ",100,100,20,20,1,0\n";
  spit(path("d.txt"), dets);
  const auto cmd = std::string("\"") + bin + "\" track --detections - --out-dir \"" + path("out").string() + "\" < \"" +
                   path("d.txt").string() + "\"";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const auto tracks = slurp(path("out/tracks.txt"));
  EXPECT_NE(tracks.find("10\t1\t0\t110\t110\t20\t20\n"), std::string::npos) << tracks;

  const auto missing = std::string("\"") + bin + "\" track --detections \"" + path("nope.txt").string() + "\" 2>/dev/null";
  const int status = std::system(missing.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 2);
}
