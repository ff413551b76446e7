#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fishnet/errors.hpp"

namespace fish {

enum class Arch { fishnet, resnet_control, plain };
enum class Stem { conv7x7_s2, two_residual_blocks };
enum class Downsample { max2, max3, avg2, conv2 };

const char* arch_name(Arch a);
const char* stem_name(Stem s);
const char* downsample_name(Downsample d);

// Declarative description of a network. Stages are 1-indexed; stage s lives
// at spatial resolution input / 2^(s+1) (the stem halves once, a pool enters
// stage 1, and one down-sampling step separates consecutive stages).
struct FishNetConfig {
  Arch arch = Arch::fishnet;
  int64_t num_stages = 0;
  int64_t in_channels = 0;
  int64_t in_height = 0;
  int64_t in_width = 0;
  Stem stem = Stem::conv7x7_s2;
  std::vector<int64_t> channels_per_stage;  // tail entry channels per stage
  std::vector<int64_t> tail_blocks;
  std::vector<int64_t> body_blocks;  // per stage; counts include the UR refinement unit
  std::vector<int64_t> head_blocks;  // per stage; counts include the DR refinement unit
  std::vector<int64_t> reduction_k;  // per stage; entry for stage 1 is unused
  int64_t body_dilation = 2;
  int64_t groups = 0;  // base channel-group width at stage 1; 0/1 = ungrouped
  int64_t num_classes = 0;
  Downsample downsample = Downsample::max2;

  void validate() const;
  std::string serialize() const;

  static FishNetConfig parse(const std::string& text);
  static FishNetConfig load_file(const std::string& path);
};

// Channel arithmetic shared by the builder, the validator and the parameter
// accounting: entry widths of every stage feature plus concat widths.
struct DerivedChannels {
  std::vector<int64_t> tail;       // t_s, stage entry channels (== channels_per_stage)
  std::vector<int64_t> body;       // b_s, body entry channels (b_S = bridge output)
  std::vector<int64_t> ur_concat;  // concat width feeding the UR at stage s (s >= 2)
  std::vector<int64_t> head;       // h_s, head entry channels
  std::vector<int64_t> dr_concat;  // concat width feeding the DR at stage s (s <= S-1)
  int64_t final_channels = 0;      // channels of the last head feature
};

// Throws ConfigError (with the stage index) on divisibility violations.
DerivedChannels derive_channels(const FishNetConfig& cfg);

// Effective channel-group width for blocks at stage s: base width doubled per
// stage. Returns 0 when grouping is off.
inline int64_t group_width_at_stage(const FishNetConfig& cfg, int64_t stage) {
  if (cfg.groups <= 1) return 0;
  return cfg.groups << (stage - 1);
}

}  // namespace fish
