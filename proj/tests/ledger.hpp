#pragma once

// Closed-form parameter ledger, computed straight from a config with no
// graph walk. Kept deliberately independent of the builder and accounting
// code so the two routes can disagree.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "fishnet/config.hpp"

namespace ledger {

inline int64_t bn2(int64_t c) { return 2 * c; }

inline int64_t groups_at(const fish::FishNetConfig& c, int64_t width, int64_t stage) {
  if (c.groups <= 1 || stage < 1) return 1;
  const int64_t gw = c.groups << (stage - 1);
  if (gw >= width) return 1;
  return width / gw;
}

// BN-ReLU-1x1 / BN-ReLU-3x3(grouped) / BN-ReLU-1x1 with width cout/4
inline int64_t branch(const fish::FishNetConfig& c, int64_t cin, int64_t cout,
                      int64_t stage) {
  const int64_t w = cout / 4;
  const int64_t g = groups_at(c, w, stage);
  return bn2(cin) + cin * w + bn2(w) + 9 * w * (w / g) + bn2(w) + w * cout;
}

inline int64_t block(const fish::FishNetConfig& c, int64_t cin, int64_t cout,
                     int64_t stage) {
  return branch(c, cin, cout, stage) + (cin != cout ? cin * cout : 0);
}

inline int64_t stem_params(const fish::FishNetConfig& c) {
  const int64_t c1 = c.channels_per_stage[0];
  if (c.stem == fish::Stem::conv7x7_s2) return c.in_channels * c1 * 49;
  // first stem block strides and projects even when channel counts agree
  return branch(c, c.in_channels, c1, 0) + c.in_channels * c1 + block(c, c1, c1, 0);
}

inline int64_t classifier_params(int64_t feat, int64_t classes) {
  return bn2(feat) + feat * classes;
}

inline int64_t fishnet_params(const fish::FishNetConfig& c) {
  const int64_t S = c.num_stages;
  auto ch = [&](int64_t s) { return c.channels_per_stage[static_cast<size_t>(s - 1)]; };
  const bool conv_down = c.downsample == fish::Downsample::conv2;
  int64_t total = stem_params(c);

  for (int64_t s = 1; s <= S; ++s) {
    int64_t cur = ch(s);
    const int64_t B = c.tail_blocks[static_cast<size_t>(s - 1)];
    for (int64_t i = 0; i < B; ++i) {
      int64_t cout = ch(s);
      if (i == B - 1 && s < S && !conv_down) cout = ch(s + 1);
      total += block(c, cur, cout, s);
      cur = cout;
    }
    if (s < S && conv_down) total += 4 * ch(s) * ch(s + 1) + bn2(ch(s + 1));
  }

  const int64_t cS = ch(S);
  const int64_t sq = std::max<int64_t>(cS / 16, 1);
  total += cS * sq + sq * cS + branch(c, cS, cS, S);

  std::vector<int64_t> b(static_cast<size_t>(S + 1), 0);
  b[static_cast<size_t>(S)] = cS;
  for (int64_t s = S; s >= 2; --s) {
    const int64_t bs = b[static_cast<size_t>(s)];
    for (int64_t i = 0; i < c.body_blocks[static_cast<size_t>(s - 1)] - 1; ++i)
      total += block(c, bs, bs, s);
    total += block(c, ch(s), ch(s), s);  // transfer
    const int64_t cat = bs + ch(s);
    const int64_t k = c.reduction_k[static_cast<size_t>(s - 1)];
    total += branch(c, cat, cat / k, s);
    b[static_cast<size_t>(s - 1)] = cat / k;
  }
  for (int64_t i = 0; i < c.body_blocks[0]; ++i) total += block(c, b[1], b[1], 1);

  std::vector<int64_t> h(static_cast<size_t>(S + 1), 0);
  h[1] = b[1];
  for (int64_t s = 1; s <= S - 1; ++s) {
    const int64_t hs = h[static_cast<size_t>(s)];
    for (int64_t i = 0; i < c.head_blocks[static_cast<size_t>(s - 1)] - 1; ++i)
      total += block(c, hs, hs, s);
    const int64_t lat = s == 1 ? ch(1) : b[static_cast<size_t>(s)];
    total += block(c, lat, lat, s);  // transfer
    const int64_t cat = hs + lat;
    total += branch(c, cat, cat, s);
    if (conv_down) total += 4 * cat * cat + bn2(cat);
    h[static_cast<size_t>(s + 1)] = cat;
  }
  const int64_t hS = h[static_cast<size_t>(S)];
  for (int64_t i = 0; i < c.head_blocks[static_cast<size_t>(S - 1)]; ++i)
    total += block(c, hS, hS, S);

  return total + classifier_params(hS, c.num_classes);
}

inline int64_t control_params(const fish::FishNetConfig& c) {
  const int64_t S = c.num_stages;
  auto ch = [&](int64_t s) { return c.channels_per_stage[static_cast<size_t>(s - 1)]; };
  int64_t total = stem_params(c);
  for (int64_t s = 1; s <= S; ++s) {
    for (int64_t i = 0; i < c.tail_blocks[static_cast<size_t>(s - 1)]; ++i)
      total += block(c, ch(s), ch(s), s);
    if (s < S) total += ch(s) * ch(s + 1) + bn2(ch(s + 1));
  }
  return total + classifier_params(ch(S), c.num_classes);
}

inline int64_t plain_params(const fish::FishNetConfig& c) {
  const int64_t S = c.num_stages;
  auto ch = [&](int64_t s) { return c.channels_per_stage[static_cast<size_t>(s - 1)]; };
  int64_t total = c.in_channels * ch(1) * 49;
  int64_t cur = ch(1);
  for (int64_t s = 1; s <= S; ++s)
    for (int64_t i = 0; i < c.tail_blocks[static_cast<size_t>(s - 1)]; ++i) {
      total += 9 * cur * ch(s) + bn2(ch(s));
      cur = ch(s);
    }
  return total + classifier_params(ch(S), c.num_classes);
}

inline int64_t params_for(const fish::FishNetConfig& c) {
  switch (c.arch) {
    case fish::Arch::fishnet: return fishnet_params(c);
    case fish::Arch::resnet_control: return control_params(c);
    case fish::Arch::plain: return plain_params(c);
  }
  return 0;
}

}  // namespace ledger
