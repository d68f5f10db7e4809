#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "noiseforge/cli.hpp"
#include "noiseforge/report.hpp"

namespace noiseforge {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, HelpListsSubcommandsAndDefaults) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const char* sub : {"inject", "sweep", "eval", "validate-noise", "split", "reference-segment"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
  const auto inj = run({"inject", "--help"});
  EXPECT_EQ(inj.code, kExitOk);
  EXPECT_NE(inj.out.find("1000"), std::string::npos) << inj.out;
  EXPECT_NE(inj.out.find("0.1"), std::string::npos);
  const auto sweep = run({"sweep", "--help"});
  EXPECT_NE(sweep.out.find("0,1,2,4,6,8,10"), std::string::npos) << sweep.out;
}

TEST(Cli, VersionAndUsageErrors) {
  EXPECT_EQ(run({"--version"}).code, kExitOk);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"inject"}).code, kExitUsage);
  EXPECT_EQ(run({"sweep", "--manifest", "m.csv"}).code, kExitUsage);
}

TEST(Cli, InjectLogsCalibration) {
  TempDir dir;
  write_image(dir / "in.png", testing::synthetic_radiograph(32, 0));
  const auto r = run({"inject", (dir / "in.png").string(), "--out", (dir / "out.png").string(), "--sq",
                      "10", "--se", "2", "--seed", "4"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.err.find("photons/pixel = 10"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("sigma_e = 0.2"), std::string::npos) << r.err;
  EXPECT_EQ(read_image(dir / "out.png").extent(), (Extent{32, 32}));

  const auto again = run({"-q", "inject", (dir / "in.png").string(), "--out", (dir / "again.png").string(),
                          "--sq", "10", "--se", "2", "--seed", "4"});
  EXPECT_EQ(again.code, kExitOk);
  EXPECT_TRUE(again.err.empty()) << again.err;
  EXPECT_EQ(read_file_bytes(dir / "out.png"), read_file_bytes(dir / "again.png"));
}

TEST(Cli, InjectErrorCodes) {
  TempDir dir;
  write_image(dir / "in.png", testing::synthetic_radiograph(8, 0));
  EXPECT_EQ(run({"inject", (dir / "in.png").string(), "--out", (dir / "o.png").string(), "--sq", "0.5"}).code,
            kExitUsage);
  EXPECT_EQ(run({"inject", (dir / "missing.png").string(), "--out", (dir / "o.png").string()}).code, kExitIo);
  testing::write_text_file(dir / "rgb.ppm", std::string("P6\n1 1\n255\n") + std::string(3, '\x10'));
  EXPECT_EQ(run({"inject", (dir / "rgb.ppm").string(), "--out", (dir / "o.png").string()}).code, kExitIo);
  EXPECT_EQ(run({"inject", (dir / "in.png").string(), "--out", (dir / "o.png").string(), "--size", "0"}).code,
            kExitUsage);
}

TEST(Cli, SweepIsIdempotent) {
  TempDir dir;
  const auto manifest = testing::write_segmentation_corpus(dir / "corpus", 2, 16);
  const std::vector<std::string> args{"sweep", "--manifest", manifest.string(), "--out", (dir / "sweep").string(),
                                      "--sq-levels", "0,4", "--se-levels", "0,2"};
  const auto first = run(args);
  EXPECT_EQ(first.code, kExitOk) << first.err;
  EXPECT_NE(first.err.find("6 files rewritten"), std::string::npos) << first.err;
  EXPECT_TRUE(fs::exists(dir / "sweep" / "run_metadata.txt"));
  const auto second = run(args);
  EXPECT_NE(second.err.find("0 files rewritten, 6 unchanged"), std::string::npos) << second.err;
}

TEST(Cli, SweepRejectsBadLadder) {
  TempDir dir;
  const auto manifest = testing::write_segmentation_corpus(dir / "corpus", 1, 8);
  EXPECT_EQ(run({"sweep", "--manifest", manifest.string(), "--out", (dir / "s").string(), "--sq-levels",
                 "0,0.5"})
                .code,
            kExitUsage);
  EXPECT_FALSE(fs::exists(dir / "s"));
  EXPECT_EQ(run({"sweep", "--manifest", (dir / "none.csv").string(), "--out", (dir / "s").string()}).code,
            kExitIo);
}

TEST(Cli, EndToEndSegmentation) {
  TempDir dir;
  const auto manifest = testing::write_segmentation_corpus(dir / "corpus", 3, 24);
  const std::vector<std::string> ladder{"--sq-levels", "0,1,10", "--se-levels", "0,1,10"};
  auto sweep = std::vector<std::string>{"-q", "sweep", "--manifest", manifest.string(), "--out",
                                        (dir / "sweep").string()};
  sweep.insert(sweep.end(), ladder.begin(), ladder.end());
  ASSERT_EQ(run(sweep).code, kExitOk);
  ASSERT_EQ(run({"-q", "reference-segment", "--sweep", (dir / "sweep").string(), "--out",
                 (dir / "preds").string()})
                .code,
            kExitOk);
  auto eval = std::vector<std::string>{"eval", "--manifest", manifest.string(), "--predictions",
                                       (dir / "preds").string(), "--out", (dir / "report").string(),
                                       "--task-id", "lungs", "--tag", "reference-predictor"};
  eval.insert(eval.end(), ladder.begin(), ladder.end());
  const auto r = run(eval);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto records = parse_records(testing::read_text_file(dir / "report" / "records.csv"));
  EXPECT_EQ(records.size(), 6u * 2u);
  for (const auto& rec : records) {
    if (rec.point.is_baseline()) {
      EXPECT_EQ(rec.delta, 0.0);
    }
    EXPECT_EQ(rec.flags.front(), "reference-predictor");
  }
  EXPECT_TRUE(fs::exists(dir / "report" / "curves_lungs.json"));
  EXPECT_TRUE(fs::exists(dir / "report" / "summary_lungs.txt"));
}

TEST(Cli, InjectBaselineRequantizesInput) {
  TempDir dir;
  const auto img = testing::synthetic_radiograph(20, 4);
  write_image(dir / "in.pgm", img);
  ASSERT_EQ(run({"-q", "inject", (dir / "in.pgm").string(), "--out", (dir / "out.png").string()}).code, kExitOk);
  EXPECT_EQ(read_file_bytes(dir / "out.png"), encode_image(quantize(normalize(img)), ImageFormat::png));
}

TEST(Cli, FlagConflictsFailBeforeIo) {
  TempDir dir;
  const auto missing = (dir / "absent.csv").string();
  EXPECT_EQ(run({"eval", "--manifest", missing, "--predictions", dir.path().string(), "--out",
                 (dir / "r").string(), "--select-threshold"})
                .code,
            kExitUsage);
  EXPECT_EQ(run({"split", "--manifest", missing, "--out", (dir / "s.csv").string(), "--fractions", "0.5,0.5,0.5"})
                .code,
            kExitUsage);
  EXPECT_FALSE(fs::exists(dir / "r"));
}

TEST(Cli, EvalClassificationFixture) {
  TempDir dir;
  testing::write_text_file(dir / "cls.csv",
                           "image_id,patient_id,image_path,mask_path,label,source_tag\n"
                           "s0,p0,x.png,,0,f\ns1,p1,x.png,,0,f\ns2,p2,x.png,,1,f\ns3,p3,x.png,,1,f\n");
  testing::write_text_file(dir / "preds" / "sq0.00_se0.00" / "scores.csv",
                           "sample_id,score,label\ns0,0.1,0\ns1,0.4,0\ns2,0.35,1\ns3,0.8,1\n");
  const auto r = run({"eval", "--manifest", (dir / "cls.csv").string(), "--predictions", (dir / "preds").string(),
                      "--out", (dir / "report").string(), "--task", "cls", "--sq-levels", "0", "--se-levels", "0"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto text = testing::read_text_file(dir / "report" / "records.csv");
  EXPECT_NE(text.find("cls,0.00,0.00,auroc,0.750000,0.000000,4,"), std::string::npos) << text;
  EXPECT_NE(testing::read_text_file(dir / "report" / "summary_cls.txt").find("# auprc"), std::string::npos);
}

TEST(Cli, EvalMissingBaselineIsIoError) {
  TempDir dir;
  const auto manifest = testing::write_segmentation_corpus(dir / "corpus", 1, 8);
  fs::create_directories(dir / "preds");
  EXPECT_EQ(run({"eval", "--manifest", manifest.string(), "--predictions", (dir / "preds").string(), "--out",
                 (dir / "r").string()})
                .code,
            kExitIo);
}

TEST(Cli, ValidateNoiseExitCodes) {
  const auto ok = run({"validate-noise", "--samples", "100000"});
  EXPECT_EQ(ok.code, kExitOk) << ok.out;
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);
  const auto bad = run({"validate-noise", "--samples", "100000", "--faulty-sampler"});
  EXPECT_EQ(bad.code, kExitValidation);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(run({"validate-noise", "--samples", "10"}).code, kExitUsage);
}

TEST(Cli, SplitWritesAssignmentAndRejectsInfeasible) {
  TempDir dir;
  const auto manifest = testing::write_segmentation_corpus(dir / "corpus", 8, 8);
  const auto r = run({"split", "--manifest", manifest.string(), "--out", (dir / "split.csv").string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  const auto text = testing::read_text_file(dir / "split.csv");
  EXPECT_TRUE(text.starts_with("patient_id,split\n"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);

  const auto tiny = testing::write_segmentation_corpus(dir / "tiny", 2, 8);
  EXPECT_EQ(run({"split", "--manifest", tiny.string(), "--out", (dir / "s2.csv").string()}).code, kExitUsage);
  EXPECT_EQ(run({"split", "--manifest", manifest.string(), "--out", (dir / "s3.csv").string(), "--fractions",
                 "0.5,0.5,0.5"})
                .code,
            kExitUsage);
}

}  // namespace
}  // namespace noiseforge
