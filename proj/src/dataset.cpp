#include "fishnet/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>

namespace fish {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

struct Reader {
  const std::vector<uint8_t>& b;
  size_t pos = 0;
  uint8_t u8() {
    if (pos >= b.size()) throw IoError("dataset file truncated");
    return b[pos++];
  }
  uint16_t u16() {
    uint16_t lo = u8(), hi = u8();
    return static_cast<uint16_t>(lo | (hi << 8));
  }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(u8()) << (8 * i);
    return v;
  }
  float f32() {
    uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
};

}  // namespace

std::vector<uint8_t> serialize_dataset(const Dataset& d) {
  std::vector<uint8_t> out;
  const auto count = static_cast<uint32_t>(d.labels.size());
  out.reserve(18 + d.pixels.size() * 4 + d.labels.size() * 4);
  out.insert(out.end(), {'F', 'T', 'D', 'S'});
  put_u16(out, d.version);
  put_u32(out, count);
  put_u16(out, d.channels);
  put_u16(out, d.height);
  put_u16(out, d.width);
  put_u16(out, d.num_classes);
  for (float f : d.pixels) put_f32(out, f);
  for (uint32_t l : d.labels) put_u32(out, l);
  return out;
}

Dataset deserialize_dataset(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  if (bytes.size() < 18 || bytes[0] != 'F' || bytes[1] != 'T' || bytes[2] != 'D' ||
      bytes[3] != 'S')
    throw IoError("not an FTDS dataset (bad magic)");
  r.pos = 4;
  Dataset d;
  d.version = r.u16();
  if (d.version != 1) throw IoError("unsupported FTDS version " + std::to_string(d.version));
  const uint32_t count = r.u32();
  d.channels = r.u16();
  d.height = r.u16();
  d.width = r.u16();
  d.num_classes = r.u16();
  const uint64_t per = static_cast<uint64_t>(d.channels) * d.height * d.width;
  const uint64_t expect = 18 + count * per * 4 + count * 4ull;
  if (bytes.size() != expect)
    throw IoError("dataset length " + std::to_string(bytes.size()) +
                  " does not match header arithmetic (" + std::to_string(expect) + ")");
  d.pixels.resize(count * per);
  for (auto& f : d.pixels) f = r.f32();
  d.labels.resize(count);
  for (auto& l : d.labels) {
    l = r.u32();
    if (l >= d.num_classes)
      throw IoError("label " + std::to_string(l) + " out of range (num_classes " +
                    std::to_string(d.num_classes) + ")");
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  const auto bytes = serialize_dataset(d);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write dataset file '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open dataset file '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return deserialize_dataset(bytes);
}

namespace {
std::mt19937_64 seeded_rng(uint64_t seed, uint64_t tag, uint64_t a, uint64_t b) {
  std::seed_seq sq{seed, tag, a, b};
  return std::mt19937_64(sq);
}
constexpr double kNoiseSigma = 0.15;
}  // namespace

std::vector<float> synthetic_template(const SynthSpec& spec, int64_t cls) {
  const int64_t per = spec.channels * spec.height * spec.width;
  std::vector<float> tpl(static_cast<size_t>(per));
  auto rng = seeded_rng(spec.seed, 0x7e4d, static_cast<uint64_t>(cls), 0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& v : tpl) v = static_cast<float>(uni(rng));
  return tpl;
}

Dataset generate_synthetic(const SynthSpec& spec) {
  if (spec.num_classes < 2 || spec.per_class < 1 || spec.channels < 1 ||
      spec.height < 1 || spec.width < 1)
    throw IoError("synthetic spec: classes >= 2, per_class >= 1 and positive dims required");
  Dataset d;
  d.channels = static_cast<uint16_t>(spec.channels);
  d.height = static_cast<uint16_t>(spec.height);
  d.width = static_cast<uint16_t>(spec.width);
  d.num_classes = static_cast<uint16_t>(spec.num_classes);
  const int64_t per = spec.channels * spec.height * spec.width;
  d.pixels.reserve(static_cast<size_t>(spec.num_classes * spec.per_class * per));
  d.labels.reserve(static_cast<size_t>(spec.num_classes * spec.per_class));
  for (int64_t cls = 0; cls < spec.num_classes; ++cls) {
    const std::vector<float> tpl = synthetic_template(spec, cls);
    for (int64_t i = 0; i < spec.per_class; ++i) {
      auto rng = seeded_rng(spec.seed, 0xa2c1, static_cast<uint64_t>(cls),
                            spec.noise_offset + static_cast<uint64_t>(i));
      std::normal_distribution<double> noise(0.0, kNoiseSigma);
      for (int64_t j = 0; j < per; ++j) {
        const double v = tpl[static_cast<size_t>(j)] + noise(rng);
        d.pixels.push_back(static_cast<float>(std::clamp(v, 0.0, 1.0)));
      }
      d.labels.push_back(static_cast<uint32_t>(cls));
    }
  }
  return d;
}

}  // namespace fish
