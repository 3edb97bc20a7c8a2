// Copyright 2026 The pcinpaint Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pcinpaint/pipeline.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include "pcinpaint/synth.hpp"

namespace pcinpaint {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("pcinpaint_pipeline_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  const Bytes b = read_file(p);
  return std::string(b.begin(), b.end());
}

TrainConfig tiny(const fs::path& dir, int64_t iterations) {
  TrainConfig c = TrainConfig::desk();
  c.data_dir = (dir / "data").string();
  c.image_size = 16;
  c.iterations = iterations;
  c.batch_size = 2;
  c.unet.channels = {4, 8, 8, 8};
  c.unet.kernels = {3, 3, 3, 3};
  c.features.stage_channels = {4, 4, 4};
  c.seed = 9;
  c.output = (dir / "w.pcnw").string();
  c.log_path = (dir / "log.csv").string();
  return c;
}

TEST(Split, HashedSeventyFifteenFifteen) {
  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < 3000; ++i) ++counts[static_cast<int>(split_of("img_" + std::to_string(i) + ".png"))];
  EXPECT_NEAR(counts[1] / 3000.0, 0.70, 0.03);
  EXPECT_NEAR(counts[2] / 3000.0, 0.15, 0.03);
  EXPECT_NEAR(counts[3] / 3000.0, 0.15, 0.03);
  EXPECT_EQ(split_of("a.png"), split_of("a.png"));
  // FNV-1a 64 reference values.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Dataset, ListsSortedPngsOfTheSplit) {
  const fs::path d = scratch("list");
  write_synth_set(d, 12, 16, 1, "z");
  std::ofstream(d / "notes.txt") << "x";
  const auto all = list_images(d);
  ASSERT_EQ(all.size(), 12u);
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
  size_t parts = 0;
  for (auto s : {Split::kTrain, Split::kVal, Split::kTest}) {
    for (const auto& p : list_images(d, s)) EXPECT_EQ(split_of(p.filename().string()), s);
    parts += list_images(d, s).size();
  }
  EXPECT_EQ(parts, 12u);
  EXPECT_THROW(list_images(d / "missing"), ConfigError);
  EXPECT_THROW(parse_split("holdout"), ConfigError);
}

TEST(TrainConfig, RejectsBadValues) {
  const fs::path d = scratch("cfg");
  TrainConfig c = tiny(d, 0);
  EXPECT_THROW(c.validate(), ConfigError);
  c.iterations = 1;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.batch_size = 1;
  c.image_size = 20;  // not divisible by 8
  EXPECT_THROW(c.validate(), ConfigError);
  c.image_size = 16;
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(train_config_from_json({{"iterations", 0}}, c).validate(), ConfigError);
  EXPECT_THROW(train_config_from_json({{"itrations", 5}}, c), ConfigError);
  EXPECT_THROW(train_config_from_json({{"iterations", "many"}}, c), ConfigError);
}

TEST(TrainConfig, JsonOverridesAndPresets) {
  const auto c = train_config_from_json(
      {{"profile", "desk"}, {"iterations", 7}, {"loss", {{"preset", "no_style"}, {"hole", 5.0}}}, {"lr", 1e-3}});
  EXPECT_EQ(c.iterations, 7);
  EXPECT_EQ(c.unet.depth, 4);
  EXPECT_FALSE(c.loss.use_style);
  EXPECT_TRUE(c.loss.use_perceptual);
  EXPECT_FLOAT_EQ(c.loss.hole, 5.0f);
  EXPECT_FLOAT_EQ(c.lr, 1e-3f);
  EXPECT_FALSE(loss_preset("no_perceptual").use_perceptual);
  EXPECT_THROW(loss_preset("no_tv"), ConfigError);
}

TEST(Train, EmptyOrShortDataDirIsAnError) {
  const fs::path d = scratch("empty");
  fs::create_directories(d / "data");
  TrainConfig c = tiny(d, 1);
  EXPECT_THROW(train(c), ConfigError);
  write_synth_set(d / "data", 1, 16, 1);
  EXPECT_THROW(train(c), ConfigError);  // batch_size 2 > 1 image
  write_synth_set(d / "data", 2, 32, 1, "big");
  c.batch_size = 1;
  EXPECT_THROW(train(c), ConfigError);  // wrong image size
}

TEST(Train, DeterministicWeightsAndLog) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  write_synth_set(a / "data", 4, 16, 2);
  write_synth_set(b / "data", 4, 16, 2);
  const auto ra = train(tiny(a, 4));
  const auto rb = train(tiny(b, 4));
  EXPECT_EQ(read_file(a / "w.pcnw"), read_file(b / "w.pcnw"));
  EXPECT_EQ(slurp(a / "log.csv"), slurp(b / "log.csv"));
  ASSERT_EQ(ra.log.size(), 4u);

  const std::string log = slurp(a / "log.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "iter,tv,valid,hole,perceptual,style,total");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 5);
  for (const auto& r : ra.log) {
    const double sum = 0.1 * r.tv + r.valid + 6 * r.hole + 0.05 * r.perceptual + 120 * r.style;
    EXPECT_NEAR(r.total, sum, 1e-4 * sum);
  }
  // The file holds exactly the trained parameters.
  UNetModel m(tiny(a, 1).unet, 0);
  load_weights(m, a / "w.pcnw");
  EXPECT_TRUE(m == ra.model);

  TrainConfig other = tiny(b, 4);
  other.seed = 10;
  train(other);
  EXPECT_NE(read_file(a / "w.pcnw"), read_file(b / "w.pcnw"));
}

TEST(Train, ResumeEqualsUninterrupted) {
  const fs::path a = scratch("resume_a"), b = scratch("resume_b");
  write_synth_set(a / "data", 4, 16, 3);
  write_synth_set(b / "data", 4, 16, 3);
  train(tiny(a, 6));

  TrainConfig first = tiny(b, 3);
  first.checkpoint_path = (b / "ckpt.pcnw").string();
  first.checkpoint_every = 3;
  first.iterations = 3;
  train(first);
  TrainConfig second = tiny(b, 6);
  second.resume = first.checkpoint_path;
  const auto r = train(second);
  EXPECT_EQ(r.start_iter, 4);
  EXPECT_EQ(r.log.size(), 3u);
  EXPECT_EQ(read_file(a / "w.pcnw"), read_file(b / "w.pcnw"));
  EXPECT_EQ(slurp(a / "log.csv"), slurp(b / "log.csv"));

  TrainConfig not_ckpt = tiny(b, 6);
  not_ckpt.resume = (b / "w.pcnw").string();
  EXPECT_THROW(train(not_ckpt), WeightsError);
}

TEST(Train, BatchesDependOnlyOnSeedAndIteration) {
  const fs::path d = scratch("batch");
  write_synth_set(d / "data", 5, 16, 4);
  const TrainConfig c = tiny(d, 10);
  const auto images = load_training_images(c);
  const Batch x = sample_batch(c, images, 7), y = sample_batch(c, images, 7), z = sample_batch(c, images, 8);
  EXPECT_EQ(x.image, y.image);
  EXPECT_EQ(x.mask, y.mask);
  EXPECT_NE(x.mask, z.mask);
  ASSERT_EQ(x.indices.size(), 2u);
  EXPECT_NE(x.indices[0], x.indices[1]);
  for (int64_t n = 0; n < 2; ++n) {
    double holes = 0;
    for (int64_t i = 0; i < 256; ++i) holes += x.mask[n * 256 + i] == 0.0f;
    EXPECT_GE(holes / 256, c.mask_ratio_min - 0.01);
    EXPECT_LE(holes / 256, c.mask_ratio_max + 0.01);
  }
}

TEST(FeatureWeights, LoadedFromFile) {
  const fs::path d = scratch("feat");
  FeatureNetConfig fc = FeatureNetConfig::desk();
  fc.seed = 77;
  save_tensors(d / "f.pcnw", FeatureNetwork(fc).parameters());
  FeatureNetConfig other = FeatureNetConfig::desk();
  other.weights_path = (d / "f.pcnw").string();
  EXPECT_EQ(make_feature_network(other).parameters(), FeatureNetwork(fc).parameters());
  other.stage_channels = {8, 16, 16};
  EXPECT_THROW(make_feature_network(other), WeightsError);
}

class Eval : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = scratch("eval");
    write_synth_set(dir_ / "data", 5, 32, 6);
    cfg_.data_dir = (dir_ / "data").string();
  }
  fs::path dir_;
  EvalConfig cfg_;
};

TEST_F(Eval, NsOnlyReportStructure) {
  cfg_.methods = {"ns"};
  cfg_.report_path = (dir_ / "report.json").string();
  evaluate(cfg_);
  const auto j = nlohmann::json::parse(slurp(cfg_.report_path));
  ASSERT_EQ(j["rows"].size(), 1u);
  EXPECT_EQ(j["rows"][0]["method"], "ns");
  EXPECT_EQ(j["rows"][0]["label"], "Classical Method");
  EXPECT_EQ(j["ratios"], nlohmann::json({0.05, 0.1, 0.2}));
  for (const char* r : {"0.05", "0.1", "0.2"}) {
    const auto& cell = j["rows"][0]["values"][r];
    for (const char* m : {"l1", "mse", "psnr", "ssim"}) EXPECT_TRUE(cell[m].is_number()) << r << " " << m;
    EXPECT_EQ(cell["count"], 5);
    EXPECT_NEAR(cell["mask_ratio"].get<double>(), std::stod(r), 0.01);
  }
  EXPECT_EQ(j["images"].size(), 15u);
}

TEST_F(Eval, GroundTruthOracleIsPerfect) {
  cfg_.methods = {"gt"};
  const auto report = evaluate(cfg_, {{"gt", [&](const Tensor& image, const Tensor&) { return image; }}});
  for (double r : cfg_.ratios) {
    const auto c = report.cell("gt", r);
    EXPECT_EQ(c.count, 5);
    EXPECT_EQ(c.mean.l1, 0.0);
    EXPECT_EQ(c.mean.psnr, kPsnrCap);
    EXPECT_DOUBLE_EQ(c.mean.ssim, 1.0);
  }
}

TEST_F(Eval, MasksAreSharedAcrossMethodsAndRunsAreReproducible) {
  std::vector<Tensor> seen;
  Inpainter record = [&](const Tensor& image, const Tensor& mask) {
    seen.push_back(mask);
    return image;
  };
  cfg_.methods = {"a", "b"};
  cfg_.ratios = {0.1};
  evaluate(cfg_, {{"a", record}, {"b", record}});
  ASSERT_EQ(seen.size(), 10u);
  for (size_t i = 0; i < seen.size(); i += 2) EXPECT_EQ(seen[i], seen[i + 1]);
  EXPECT_NE(seen[0], seen[2]);

  cfg_.methods = {"ns"};
  cfg_.report_path = (dir_ / "r1.json").string();
  evaluate(cfg_);
  cfg_.report_path = (dir_ / "r2.json").string();
  evaluate(cfg_);
  EXPECT_EQ(slurp(dir_ / "r1.json"), slurp(dir_ / "r2.json"));
}

TEST_F(Eval, LearnedMethodsNeedWeights) {
  cfg_.methods = {"ns", "pconv_no_style"};
  EXPECT_THROW(evaluate(cfg_), ConfigError);
  cfg_.weights["pconv_no_style"] = (dir_ / "nope.pcnw").string();
  EXPECT_THROW(evaluate(cfg_), WeightsError);
  cfg_.methods = {"unknown"};
  EXPECT_THROW(evaluate(cfg_), ConfigError);
  cfg_.methods = {"ns"};
  cfg_.ratios = {0.0};
  EXPECT_THROW(evaluate(cfg_), ConfigError);
}

TEST_F(Eval, LearnedMethodRowsUseTheirLabels) {
  UNetModel m(UNetConfig::desk(), 3);
  save_weights(m, dir_ / "m.pcnw");
  cfg_.methods = {"pconv", "pconv_no_perceptual"};
  cfg_.weights = {{"pconv", (dir_ / "m.pcnw").string()}, {"pconv_no_perceptual", (dir_ / "m.pcnw").string()}};
  cfg_.ratios = {0.05};
  cfg_.hole_only = true;
  const auto j = evaluate(cfg_).to_json(false);
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][0]["label"], "PConv");
  EXPECT_EQ(j["rows"][1]["label"], "PConv, no Perceptual Loss");
  EXPECT_EQ(j["rows"][0]["values"], j["rows"][1]["values"]);
  EXPECT_FALSE(j.contains("images"));
}

TEST(Inpaint, PconvKeepsValidPixelsAndChecksSize) {
  UNetModel m(UNetConfig::desk(), 1);
  const Tensor img = synth_image(16, 16, 2);
  const Tensor mask = generate_mask({.ratio = 0.2, .height = 16, .width = 16, .seed = 1});
  const Tensor out = inpaint_pconv(m, img, mask);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t i = 0; i < 256; ++i)
      if (mask[i] == 1.0f) ASSERT_EQ(out[c * 256 + i], img[c * 256 + i]);
  EXPECT_THROW(inpaint_pconv(m, synth_image(12, 16, 2), Tensor({1, 1, 12, 16}, 1.0f)), ShapeError);
}

}  // namespace
}  // namespace pcinpaint
