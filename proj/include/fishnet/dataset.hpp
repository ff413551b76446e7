#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fishnet/errors.hpp"

namespace fish {

// FTDS container: magic "FTDS", u16 version, u32 count, u16 C/H/W, u16
// num_classes, then count*C*H*W little-endian float32 pixels in [0,1]
// followed by count u32 labels.
struct Dataset {
  uint16_t version = 1;
  uint16_t channels = 0;
  uint16_t height = 0;
  uint16_t width = 0;
  uint16_t num_classes = 0;
  std::vector<float> pixels;
  std::vector<uint32_t> labels;

  int64_t count() const { return static_cast<int64_t>(labels.size()); }
  int64_t sample_size() const {
    return static_cast<int64_t>(channels) * height * width;
  }
  const float* sample(int64_t i) const { return pixels.data() + i * sample_size(); }
};

std::vector<uint8_t> serialize_dataset(const Dataset& d);
Dataset deserialize_dataset(const std::vector<uint8_t>& bytes);
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

struct SynthSpec {
  int64_t num_classes = 10;
  int64_t per_class = 100;
  int64_t channels = 3;
  int64_t height = 32;
  int64_t width = 32;
  uint64_t seed = 0;
  // Samples draw noise from a stream indexed by (seed, class, offset+i), so
  // two files with the same seed but different offsets share class templates
  // while their noise is disjoint; used to carve out a held-out split.
  uint64_t noise_offset = 0;
};

// Class template: fixed uniform [0,1] pattern per (seed, class).
std::vector<float> synthetic_template(const SynthSpec& spec, int64_t cls);

// Class-conditional samples: template plus clamped Gaussian noise.
Dataset generate_synthetic(const SynthSpec& spec);

}  // namespace fish
