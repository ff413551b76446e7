#include "fishnet/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fish {

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::fishnet: return "fishnet";
    case Arch::resnet_control: return "resnet_control";
    case Arch::plain: return "plain";
  }
  return "?";
}

const char* stem_name(Stem s) {
  return s == Stem::conv7x7_s2 ? "conv7x7_s2" : "two_residual_blocks";
}

const char* downsample_name(Downsample d) {
  switch (d) {
    case Downsample::max2: return "max2";
    case Downsample::max3: return "max3";
    case Downsample::avg2: return "avg2";
    case Downsample::conv2: return "conv2";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
  }
}

std::vector<int64_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<int64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  if (out.empty()) throw ConfigError("key '" + key + "': expected comma-separated integers");
  return out;
}

std::string join(const std::vector<int64_t>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

}  // namespace

FishNetConfig FishNetConfig::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    if (kv.count(key))
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = val;
  }

  static const std::set<std::string> known = {
      "arch",        "num_stages",  "input_shape", "stem",
      "channels_per_stage", "tail_blocks", "body_blocks", "head_blocks",
      "reduction_k", "body_dilation", "groups",    "num_classes",
      "downsample"};
  for (const auto& [key, val] : kv)
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "'");

  FishNetConfig cfg;
  auto take = [&kv](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::pair<bool, std::string>{false, ""};
    std::string v = it->second;
    kv.erase(it);
    return std::pair<bool, std::string>{true, v};
  };

  if (auto [ok, v] = take("arch"); ok) {
    if (v == "fishnet") cfg.arch = Arch::fishnet;
    else if (v == "resnet_control") cfg.arch = Arch::resnet_control;
    else if (v == "plain") cfg.arch = Arch::plain;
    else throw ConfigError("arch must be fishnet|resnet_control|plain, got '" + v + "'");
  }
  if (auto [ok, v] = take("num_stages"); ok) cfg.num_stages = parse_int("num_stages", v);
  else throw ConfigError("missing required key 'num_stages'");
  if (auto [ok, v] = take("input_shape"); ok) {
    auto dims = parse_list("input_shape", v);
    if (dims.size() != 3) throw ConfigError("input_shape must be C,H,W");
    cfg.in_channels = dims[0];
    cfg.in_height = dims[1];
    cfg.in_width = dims[2];
  } else {
    throw ConfigError("missing required key 'input_shape'");
  }
  if (auto [ok, v] = take("stem"); ok) {
    if (v == "conv7x7_s2") cfg.stem = Stem::conv7x7_s2;
    else if (v == "two_residual_blocks") cfg.stem = Stem::two_residual_blocks;
    else throw ConfigError("stem must be conv7x7_s2|two_residual_blocks, got '" + v + "'");
  }
  if (auto [ok, v] = take("channels_per_stage"); ok)
    cfg.channels_per_stage = parse_list("channels_per_stage", v);
  else
    throw ConfigError("missing required key 'channels_per_stage'");
  if (auto [ok, v] = take("tail_blocks"); ok) cfg.tail_blocks = parse_list("tail_blocks", v);
  else throw ConfigError("missing required key 'tail_blocks'");
  if (auto [ok, v] = take("body_blocks"); ok) cfg.body_blocks = parse_list("body_blocks", v);
  if (auto [ok, v] = take("head_blocks"); ok) cfg.head_blocks = parse_list("head_blocks", v);
  if (auto [ok, v] = take("reduction_k"); ok) cfg.reduction_k = parse_list("reduction_k", v);
  if (auto [ok, v] = take("body_dilation"); ok)
    cfg.body_dilation = parse_int("body_dilation", v);
  if (auto [ok, v] = take("groups"); ok) cfg.groups = parse_int("groups", v);
  if (auto [ok, v] = take("num_classes"); ok) cfg.num_classes = parse_int("num_classes", v);
  else throw ConfigError("missing required key 'num_classes'");
  if (auto [ok, v] = take("downsample"); ok) {
    if (v == "max2") cfg.downsample = Downsample::max2;
    else if (v == "max3") cfg.downsample = Downsample::max3;
    else if (v == "avg2") cfg.downsample = Downsample::avg2;
    else if (v == "conv2") cfg.downsample = Downsample::conv2;
    else throw ConfigError("downsample must be max2|max3|avg2|conv2, got '" + v + "'");
  }

  // Non-fishnet archs do not use the body/head/reduction lists; default them
  // so one validator can run uniformly.
  const size_t n = static_cast<size_t>(cfg.num_stages > 0 ? cfg.num_stages : 0);
  if (cfg.body_blocks.empty()) cfg.body_blocks.assign(n, 1);
  if (cfg.head_blocks.empty()) cfg.head_blocks.assign(n, 1);
  if (cfg.reduction_k.empty()) cfg.reduction_k.assign(n, 1);

  cfg.validate();
  return cfg;
}

FishNetConfig FishNetConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return parse(os.str());
}

std::string FishNetConfig::serialize() const {
  std::ostringstream os;
  os << "arch = " << arch_name(arch) << "\n";
  os << "num_stages = " << num_stages << "\n";
  os << "input_shape = " << in_channels << ',' << in_height << ',' << in_width << "\n";
  os << "num_classes = " << num_classes << "\n";
  os << "stem = " << stem_name(stem) << "\n";
  os << "channels_per_stage = " << join(channels_per_stage) << "\n";
  os << "tail_blocks = " << join(tail_blocks) << "\n";
  os << "body_blocks = " << join(body_blocks) << "\n";
  os << "head_blocks = " << join(head_blocks) << "\n";
  os << "reduction_k = " << join(reduction_k) << "\n";
  os << "body_dilation = " << body_dilation << "\n";
  os << "groups = " << groups << "\n";
  os << "downsample = " << downsample_name(downsample) << "\n";
  return os.str();
}

void FishNetConfig::validate() const {
  if (num_stages < 2)
    throw ConfigError("num_stages must be >= 2, got " + std::to_string(num_stages));
  const auto n = static_cast<size_t>(num_stages);
  if (channels_per_stage.size() != n)
    throw ConfigError("channels_per_stage must list one value per stage (" +
                      std::to_string(num_stages) + "), got " +
                      std::to_string(channels_per_stage.size()));
  for (auto& [name, list] : {std::pair<const char*, const std::vector<int64_t>&>{
                                 "tail_blocks", tail_blocks},
                             {"body_blocks", body_blocks},
                             {"head_blocks", head_blocks},
                             {"reduction_k", reduction_k}})
    if (list.size() != n)
      throw ConfigError(std::string(name) + " must list one value per stage (" +
                        std::to_string(num_stages) + "), got " +
                        std::to_string(list.size()));
  if (in_channels < 1) throw ConfigError("input_shape: channels must be >= 1");
  const int64_t factor = int64_t(1) << (num_stages + 1);
  for (int64_t dim : {in_height, in_width}) {
    if (dim % factor != 0 || dim / factor < 1)
      throw ConfigError("input spatial dim " + std::to_string(dim) +
                        " must be a positive multiple of 2^(num_stages+1) = " +
                        std::to_string(factor) +
                        " so that every stage keeps dims >= 1");
  }
  if (num_classes < 2)
    throw ConfigError("num_classes must be >= 2, got " + std::to_string(num_classes));
  if (body_dilation < 1)
    throw ConfigError("body_dilation must be >= 1, got " + std::to_string(body_dilation));
  if (groups < 0 || groups == 2 || groups == 3)
    throw ConfigError("groups is a channel-group width: 0/1 (off) or >= 4, got " +
                      std::to_string(groups));

  for (int s = 1; s <= num_stages; ++s) {
    const int64_t c = channels_per_stage[static_cast<size_t>(s - 1)];
    if (c < 4 || (arch != Arch::plain && c % 4 != 0))
      throw ConfigError("channels_per_stage: stage " + std::to_string(s) + " has " +
                            std::to_string(c) +
                            " channels; needs a positive multiple of 4 (bottleneck width)",
                        s);
    if (tail_blocks[static_cast<size_t>(s - 1)] < 1)
      throw ConfigError("tail_blocks must be >= 1 at stage " + std::to_string(s), s);
    if (reduction_k[static_cast<size_t>(s - 1)] < 1)
      throw ConfigError("reduction_k must be >= 1 at stage " + std::to_string(s), s);
    if (body_blocks[static_cast<size_t>(s - 1)] < (s == 1 ? 0 : 1))
      throw ConfigError("body_blocks must be >= 1 at stage " + std::to_string(s) +
                            " (the UR refinement unit counts as one block)",
                        s);
    if (head_blocks[static_cast<size_t>(s - 1)] < (s == num_stages ? 0 : 1))
      throw ConfigError("head_blocks must be >= 1 at stage " + std::to_string(s) +
                            " (the DR refinement unit counts as one block)",
                        s);
  }
  if (arch == Arch::fishnet) derive_channels(*this);  // throws on divisibility issues
}

DerivedChannels derive_channels(const FishNetConfig& cfg) {
  const int64_t S = cfg.num_stages;
  DerivedChannels d;
  d.tail = cfg.channels_per_stage;
  d.body.assign(static_cast<size_t>(S), 0);
  d.ur_concat.assign(static_cast<size_t>(S), 0);
  d.head.assign(static_cast<size_t>(S), 0);
  d.dr_concat.assign(static_cast<size_t>(S), 0);

  auto tail_at = [&](int64_t s) { return d.tail[static_cast<size_t>(s - 1)]; };

  // body: bridge keeps the last tail width, then UR from stage S down to 2
  d.body[static_cast<size_t>(S - 1)] = tail_at(S);
  for (int64_t s = S; s >= 2; --s) {
    const int64_t cat = d.body[static_cast<size_t>(s - 1)] + tail_at(s);
    const int64_t k = cfg.reduction_k[static_cast<size_t>(s - 1)];
    if (cat % k != 0)
      throw ConfigError("UR at stage " + std::to_string(s) + ": concat width " +
                            std::to_string(cat) + " not divisible by reduction k " +
                            std::to_string(k),
                        static_cast<int>(s));
    const int64_t out = cat / k;
    if (out % 4 != 0)
      throw ConfigError("UR at stage " + std::to_string(s) + ": output width " +
                            std::to_string(out) +
                            " must be a multiple of 4 (bottleneck width)",
                        static_cast<int>(s));
    d.ur_concat[static_cast<size_t>(s - 1)] = cat;
    d.body[static_cast<size_t>(s - 2)] = out;
  }

  // head: starts from the refined body output at stage 1; the first DR
  // concatenates the tail's stage-1 feature, later DRs the body features
  d.head[0] = d.body[0];
  for (int64_t s = 1; s <= S - 1; ++s) {
    const int64_t lateral = (s == 1) ? tail_at(1) : d.body[static_cast<size_t>(s - 1)];
    const int64_t cat = d.head[static_cast<size_t>(s - 1)] + lateral;
    if (cat % 4 != 0)
      throw ConfigError("DR at stage " + std::to_string(s) + ": concat width " +
                            std::to_string(cat) +
                            " must be a multiple of 4 (bottleneck width)",
                        static_cast<int>(s));
    d.dr_concat[static_cast<size_t>(s - 1)] = cat;
    d.head[static_cast<size_t>(s)] = cat;
  }
  d.final_channels = d.head[static_cast<size_t>(S - 1)];
  return d;
}

}  // namespace fish
