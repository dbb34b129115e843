#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "rowssl/config.hpp"
#include "rowssl/errors.hpp"

using namespace rowssl;
using nlohmann::json;

TEST(RunConfig, JsonRoundTrip) {
  json j = json::object();
  apply_override(j, "seed=7");
  apply_override(j, "train.epsilon=1.5");
  apply_override(j, "split.mode=MNAR");
  apply_override(j, "train.class_count_mode=estimate");
  const RunConfig c = run_config_from_json(j);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train.epsilon, 1.5);
  EXPECT_EQ(c.split.mode, MismatchMode::MNAR);
  EXPECT_EQ(c.train.class_count_mode, ClassCountMode::Estimate);
  const RunConfig back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.train, c.train);
}

TEST(RunConfig, SeedPropagatesToSections) {
  const RunConfig a = run_config_from_json(json{{"seed", 1}});
  const RunConfig b = run_config_from_json(json{{"seed", 2}});
  EXPECT_EQ(a.blobs.seed, 1u);
  EXPECT_NE(a.split.seed, b.split.seed);
  EXPECT_NE(a.train.seed, b.train.seed);
  // Explicit section seeds win.
  const RunConfig pinned = run_config_from_json(json{{"seed", 1}, {"train", {{"seed", 99}}}});
  EXPECT_EQ(pinned.train.seed, 99u);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  auto message = [](const json& j) {
    try {
      run_config_from_json(j);
    } catch (const InvalidArgument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(json{{"trian", json::object()}}).find("unknown key 'trian'"), std::string::npos);
  EXPECT_NE(message(json{{"train", {{"epsilonn", 1}}}}).find("train.epsilonn"), std::string::npos);
  EXPECT_NE(message(json{{"train", {{"epsilon", "big"}}}}).find("wrong type"), std::string::npos);
  EXPECT_NE(message(json{{"blobs", {{"num_classes", 5}}}}).find("num_classes"), std::string::npos);
  EXPECT_NE(message(json{{"protocols", {"train", "test-everything"}}}).find("test-everything"), std::string::npos);
  EXPECT_FALSE(message(json{{"train", {{"batch_size", 0}}}}).empty());
  EXPECT_THROW(run_config_from_json(json::array()), InvalidArgument);
}

TEST(Overrides, ParseValuesAsJsonWhenPossible) {
  json j = json::object();
  apply_override(j, "a.b.c=3");
  apply_override(j, "a.flag=true");
  apply_override(j, "name=plain text");
  apply_override(j, "list=[1,2]");
  EXPECT_EQ(j["a"]["b"]["c"], 3);
  EXPECT_EQ(j["a"]["flag"], true);
  EXPECT_EQ(j["name"], "plain text");
  EXPECT_EQ(j["list"], json::array({1, 2}));
  EXPECT_THROW(apply_override(j, "novalue"), InvalidArgument);
  EXPECT_THROW(apply_override(j, "=3"), InvalidArgument);
  EXPECT_THROW(apply_override(j, "a..b=3"), InvalidArgument);
}

TEST(LoadRunConfig, ReadsFilesAndReportsParseErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "rowssl_test_config";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.json") << R"({"seed": 4, "train": {"epochs": 3}})";
    std::ofstream(dir / "bad.json") << R"({"seed": )";
  }
  const RunConfig c = load_run_config(dir / "ok.json");
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.train.epochs, 3);
  EXPECT_THROW(load_run_config(dir / "bad.json"), InvalidArgument);
  EXPECT_THROW(load_run_config(dir / "missing.json"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST(SectionReaders, KeepDefaultsForAbsentKeys) {
  TrainConfig t;
  from_json(json{{"epochs", 5}}, t);
  TrainConfig expected;
  expected.epochs = 5;
  EXPECT_EQ(t, expected);
  BlobSpec b;
  from_json(json::object(), b);
  EXPECT_EQ(to_json(b), to_json(BlobSpec{}));
}
