#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fishnet/config.hpp"

using namespace fish;

namespace {
const char* kTiny = R"(
# comment line
arch = fishnet
num_stages = 3
input_shape = 3,32,32
num_classes = 10
stem = conv7x7_s2
channels_per_stage = 16,32,64
tail_blocks = 1,1,1
body_blocks = 1,1,1
head_blocks = 1,1,1
reduction_k = 1,2,2
body_dilation = 2
groups = 0
downsample = max2
)";
}

TEST_CASE("parse round-trips through serialize") {
  FishNetConfig cfg = FishNetConfig::parse(kTiny);
  CHECK(cfg.num_stages == 3);
  CHECK(cfg.in_height == 32);
  CHECK(cfg.channels_per_stage == std::vector<int64_t>{16, 32, 64});
  CHECK(cfg.reduction_k == std::vector<int64_t>{1, 2, 2});
  FishNetConfig again = FishNetConfig::parse(cfg.serialize());
  CHECK(again.serialize() == cfg.serialize());
}

TEST_CASE("unknown and malformed keys are errors") {
  CHECK_THROWS_WITH_AS(FishNetConfig::parse("bogus = 1\n"), doctest::Contains("bogus"),
                       ConfigError);
  std::string text(kTiny);
  CHECK_THROWS_AS(FishNetConfig::parse(text + "extra_key = 7\n"), ConfigError);
  CHECK_THROWS_AS(FishNetConfig::parse("num_stages 3\n"), ConfigError);
  CHECK_THROWS_AS(FishNetConfig::parse(text + "num_stages = 3\n"), ConfigError);  // dup
}

TEST_CASE("missing required keys are errors") {
  CHECK_THROWS_WITH_AS(FishNetConfig::parse("num_stages = 3\n"),
                       doctest::Contains("input_shape"), ConfigError);
}

TEST_CASE("per-stage list lengths must match num_stages") {
  std::string text(kTiny);
  const std::string bad =
      "arch = fishnet\nnum_stages = 3\ninput_shape = 3,32,32\nnum_classes = 10\n"
      "channels_per_stage = 16,32\ntail_blocks = 1,1,1\nbody_blocks = 1,1,1\n"
      "head_blocks = 1,1,1\nreduction_k = 1,2,2\n";
  CHECK_THROWS_WITH_AS(FishNetConfig::parse(bad), doctest::Contains("channels_per_stage"),
                       ConfigError);
}

TEST_CASE("stage geometry: spatial dims must survive the whole ladder") {
  const std::string bad =
      "num_stages = 3\ninput_shape = 3,24,24\nnum_classes = 10\n"
      "channels_per_stage = 16,32,64\ntail_blocks = 1,1,1\nbody_blocks = 1,1,1\n"
      "head_blocks = 1,1,1\nreduction_k = 1,2,2\n";
  CHECK_THROWS_AS(FishNetConfig::parse(bad), ConfigError);
}

TEST_CASE("UR divisibility violations carry the stage index") {
  // bridge output 20 + tail 20 = 40, not divisible by k = 3 at stage 3
  const std::string bad =
      "num_stages = 3\ninput_shape = 3,32,32\nnum_classes = 10\n"
      "channels_per_stage = 16,32,20\ntail_blocks = 1,1,1\nbody_blocks = 1,1,1\n"
      "head_blocks = 1,1,1\nreduction_k = 1,2,3\n";
  try {
    FishNetConfig::parse(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.stage() == 3);
    CHECK(std::string(e.what()).find("stage 3") != std::string::npos);
  }
}

TEST_CASE("derived channel arithmetic matches the tiny walk-through") {
  FishNetConfig cfg = FishNetConfig::parse(kTiny);
  DerivedChannels d = derive_channels(cfg);
  CHECK(d.body == std::vector<int64_t>{48, 64, 64});
  CHECK(d.ur_concat == std::vector<int64_t>{0, 96, 128});
  CHECK(d.head == std::vector<int64_t>{48, 64, 128});
  CHECK(d.dr_concat == std::vector<int64_t>{64, 128, 0});
  CHECK(d.final_channels == 128);
}

TEST_CASE("group width doubles per stage") {
  FishNetConfig cfg = FishNetConfig::parse(kTiny);
  cfg.groups = 4;
  CHECK(group_width_at_stage(cfg, 1) == 4);
  CHECK(group_width_at_stage(cfg, 2) == 8);
  CHECK(group_width_at_stage(cfg, 3) == 16);
  cfg.groups = 0;
  CHECK(group_width_at_stage(cfg, 2) == 0);
}
