// Copyright 2026 The wseg Authors. All Rights Reserved.
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

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "wseg/blocks.hpp"
#include "wseg/error.hpp"
#include "wseg/gradcheck.hpp"
#include "wseg/ops.hpp"
#include "wseg/params.hpp"

using namespace wseg;
using wseg::testing::random_tensor;

namespace {

std::int64_t aspp_closed_form(std::int64_t cin, std::int64_t cb) {
  return 29 * cin * cb + 5 * cb * cb;
}
std::int64_t wasp_closed_form(std::int64_t cin, std::int64_t cb) {
  return 11 * cin * cb + 23 * cb * cb;
}

NeckSpec neck(NeckSpec::Kind kind, int cin, int cb) {
  NeckSpec s;
  s.kind = kind;
  s.c_in = cin;
  s.c_b = cb;
  return s;
}

ParameterSet initialised(const ModuleSpec& spec, std::uint64_t seed) {
  ParameterSet set = ParameterSet::allocate(spec);
  std::mt19937_64 rng(seed);
  set.initialize(rng);
  return set;
}

// Gives every bias and norm affine parameter a random value so gradient
// checks do not run through the all-zero initial state.
void randomise_affine(ParameterSet& set, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (ParamEntry& e : set.entries()) {
    if (e.role == ParamRole::conv_bias || e.role == ParamRole::norm_beta) {
      for (double& v : e.tensor.mutable_data()) v = u(rng);
    } else if (e.role == ParamRole::norm_gamma) {
      for (double& v : e.tensor.mutable_data()) v = 1.0 + u(rng);
    }
  }
}

}  // namespace

TEST_CASE("count_params of a single conv") {
  ModuleSpec c = ModuleSpec::conv("c", 2, 4, 3, 3, false);
  ParamCount pc = count_params(c);
  CHECK(pc.conv_weights == 72);
  CHECK(pc.total() == 72);
  ParamCount with_bias = count_params(ModuleSpec::conv("c", 2, 4, 3, 3, true));
  CHECK(with_bias.conv_biases == 4);
  CHECK(with_bias.total() == 76);
}

TEST_CASE("neck parameter closed forms") {
  const ParamCount a = count_params(neck_spec(neck(NeckSpec::Kind::aspp, 64, 16)));
  const ParamCount w = count_params(neck_spec(neck(NeckSpec::Kind::wasp, 64, 16)));
  CHECK(a.conv_weights == 30976);
  CHECK(w.conv_weights == 17152);
  CHECK(a.conv_weights == aspp_closed_form(64, 16));
  CHECK(w.conv_weights == wasp_closed_form(64, 16));
  const double reduction = 100.0 * static_cast<double>(a.conv_weights - w.conv_weights) /
                           static_cast<double>(a.conv_weights);
  CHECK(std::round(reduction * 10.0) / 10.0 == 44.6);
  // Each of the six conv+bn blocks carries 2 * C_b norm parameters.
  CHECK(a.norm_params == 6 * 2 * 16);
  CHECK(w.norm_params == a.norm_params);

  for (int cin : {8, 16, 40, 64}) {
    for (int cb = 1; cb <= cin; cb += 3) {
      const auto pa = count_params(neck_spec(neck(NeckSpec::Kind::aspp, cin, cb))).conv_weights;
      const auto pw = count_params(neck_spec(neck(NeckSpec::Kind::wasp, cin, cb))).conv_weights;
      CHECK(pa == aspp_closed_form(cin, cb));
      CHECK(pw == wasp_closed_form(cin, cb));
      CHECK(pa - pw == 18LL * cb * (cin - cb));
      if (cb < cin) CHECK(pw < pa);
    }
  }
  const auto eq_a = count_params(neck_spec(neck(NeckSpec::Kind::aspp, 16, 16))).conv_weights;
  const auto eq_w = count_params(neck_spec(neck(NeckSpec::Kind::wasp, 16, 16))).conv_weights;
  CHECK(eq_a == eq_w);
}

TEST_CASE("parameter enumeration is ordered and total is the sum") {
  const ModuleSpec spec = neck_spec(neck(NeckSpec::Kind::wasp, 64, 16));
  const auto first = enumerate_params(spec);
  const auto second = enumerate_params(spec);
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i].name == second[i].name);
  CHECK(first.front().name == "neck.s0.conv.weight");
  CHECK(first.back().name == "neck.fuse.bn.running_var");
  const ParamCount pc = count_params(spec);
  std::int64_t sum = 0;
  for (const auto& [name, n] : pc.by_name) sum += n;
  CHECK(sum == pc.total());
}

TEST_CASE("spec validation") {
  NeckSpec s;
  s.rates = {2, 2, 6};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.rates = {1, 2, 3};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.rates = {2, 4, 6};
  s.c_b = 80;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  HanetSpec h;
  h.reduction = 5;
  CHECK_THROWS_AS(h.validate(), ConfigError);
  h.reduction = 4;
  h.pe_base = 1.0;
  CHECK_THROWS_AS(h.validate(), ConfigError);
}

TEST_CASE("positional encoding") {
  SUBCASE("row zero") {
    Tensor pe = positional_encoding(4, 6, 100.0);
    for (int c = 0; c < 6; ++c) CHECK(pe.at(0, c, 0, 0) == (c % 2 == 0 ? 0.0 : 1.0));
  }
  SUBCASE("printed values") {
    for (int c : {2, 4, 16}) {
      Tensor pe = positional_encoding(3, c, 100.0);
      CHECK(std::abs(pe.at(0, 0, 1, 0) - std::sin(1.0)) <= 1e-12);
      CHECK(std::abs(pe.at(0, 0, 1, 0) - 0.841471) < 5e-7);
    }
    Tensor pe = positional_encoding(3, 4, 100.0);
    // 100^(2/4) = 10.
    CHECK(std::abs(pe.at(0, 2, 2, 0) - std::sin(0.2)) <= 1e-12);
    CHECK(std::abs(pe.at(0, 2, 2, 0) - 0.198669) < 5e-7);
    CHECK(std::abs(pe.at(0, 3, 2, 0) - std::cos(0.2)) <= 1e-12);
  }
  SUBCASE("sin^2 + cos^2 = 1") {
    Tensor pe = positional_encoding(16, 16, 100.0);
    for (int p = 0; p < 16; ++p) {
      for (int i = 0; i < 8; ++i) {
        const double s = pe.at(0, 2 * i, p, 0), c = pe.at(0, 2 * i + 1, p, 0);
        CHECK(std::abs(s * s + c * c - 1.0) <= 1e-12);
      }
    }
  }
  SUBCASE("errors") { CHECK_THROWS_AS(positional_encoding(4, 5, 100.0), ConfigError); }
}

TEST_CASE("height-driven attention") {
  HanetSpec hs;
  hs.c_l = 8;
  hs.c_h = 6;
  hs.h_hat = 4;
  hs.reduction = 2;
  ParameterSet set = ParameterSet::allocate(hanet_spec(hs));
  ParamView view(set, "hanet");
  std::mt19937_64 rng(31);

  SUBCASE("zero weights give one half everywhere") {
    for (bool pe : {true, false}) {
      hs.enable_pe = pe;
      Tensor a = hanet_attention(random_tensor({2, 8, 6, 5}, rng, -5, 5), hs, view, 9);
      REQUIRE(a.shape() == Shape{2, 6, 9, 1});
      for (double v : a.data()) CHECK(v == 0.5);
    }
  }

  std::mt19937_64 init(32);
  set.initialize(init);
  randomise_affine(set, 33);

  SUBCASE("values in (0, 1)") {
    Tensor a = hanet_attention(random_tensor({2, 8, 7, 3}, rng, -20, 20), hs, view, 12);
    for (double v : a.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  SUBCASE("width duplication and permutation leave the map unchanged") {
    Tensor x = random_tensor({1, 8, 6, 5}, rng);
    std::vector<double> dup(static_cast<std::size_t>(8) * 6 * 10);
    std::vector<double> perm(x.numel());
    const int order[5] = {3, 0, 4, 2, 1};
    for (int c = 0; c < 8; ++c) {
      for (int h = 0; h < 6; ++h) {
        for (int w = 0; w < 5; ++w) {
          const double v = x.at(0, c, h, w);
          dup[(static_cast<std::size_t>(c) * 6 + h) * 10 + 2 * w] = v;
          dup[(static_cast<std::size_t>(c) * 6 + h) * 10 + 2 * w + 1] = v;
          perm[(static_cast<std::size_t>(c) * 6 + h) * 5 + order[w]] = v;
        }
      }
    }
    Tensor a = hanet_attention(x, hs, view, 6);
    Tensor ad = hanet_attention(Tensor::from_data({1, 8, 6, 10}, dup), hs, view, 6);
    Tensor ap = hanet_attention(Tensor::from_data({1, 8, 6, 5}, perm), hs, view, 6);
    CHECK(wseg::testing::max_abs_diff(a.data(), ad.data()) <= 1e-12);
    CHECK(wseg::testing::max_abs_diff(a.data(), ap.data()) <= 1e-12);
  }
  SUBCASE("coarse height is clamped to the feature height") {
    Tensor a = hanet_attention(random_tensor({1, 8, 2, 3}, rng), hs, view, 5);
    CHECK(a.shape() == Shape{1, 6, 5, 1});
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(hanet_attention(Tensor::zeros({1, 7, 4, 4}), hs, view, 4),
                    DimensionError);
  }
  SUBCASE("gradient check with respect to x_l and the conv weights") {
    Tensor x = random_tensor({1, 8, 8, 8}, rng);
    Tensor w = random_tensor({1, 6, 8, 1}, rng);
    auto fx = [&](const Tensor& t) { return sum(mul(hanet_attention(t, hs, view, 8), w)); };
    CHECK(finite_difference_check(fx, x) < 1e-5);
    for (const char* name : {"hanet.conv1.weight", "hanet.conv2.weight", "hanet.conv1.bias"}) {
      Tensor saved = set.at(name);
      auto fw = [&](const Tensor& t) {
        set.at(name) = t;
        return sum(mul(hanet_attention(x, hs, view, 8), w));
      };
      CHECK(finite_difference_check(fw, saved) < 1e-5);
      set.at(name) = saved;
    }
  }
}

TEST_CASE("hanet_apply") {
  std::mt19937_64 rng(34);
  Tensor x = random_tensor({2, 3, 4, 5}, rng);
  Tensor ones = Tensor::full({2, 3, 4, 1}, 1.0);
  Tensor y1 = hanet_apply(x, ones);
  CHECK(std::vector<double>(y1.data().begin(), y1.data().end()) ==
        std::vector<double>(x.data().begin(), x.data().end()));
  Tensor y0 = hanet_apply(x, Tensor::zeros({2, 3, 4, 1}));
  for (double v : y0.data()) CHECK(v == 0.0);
  Tensor a = random_tensor({2, 3, 4, 1}, rng, 0, 1);
  Tensor y = hanet_apply(x, a);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 5; ++w) CHECK(y.at(n, c, h, w) == a.at(n, c, h, 0) * x.at(n, c, h, w));
  CHECK_THROWS_AS(hanet_apply(x, Tensor::zeros({2, 3, 3, 1})), DimensionError);
  CHECK_THROWS_AS(hanet_apply(x, Tensor::zeros({2, 2, 4, 1})), DimensionError);
  CHECK_THROWS_AS(hanet_apply(x, Tensor::zeros({2, 3, 4, 5})), DimensionError);
  CHECK_THROWS_AS(hanet_apply(x, Tensor::zeros({3, 3, 4, 1})), DimensionError);
}

TEST_CASE("ASPP and WASP shapes and zero response") {
  for (auto kind : {NeckSpec::Kind::aspp, NeckSpec::Kind::wasp}) {
    const NeckSpec s = neck(kind, 8, 4);
    ParameterSet set = initialised(neck_spec(s), 41);
    ParamView view(set, "neck");
    std::mt19937_64 rng(42);
    for (int h = 4; h <= 16; h += 3) {
      for (int w = 4; w <= 16; w += 4) {
        Tensor y = neck_forward(random_tensor({2, 8, h, w}, rng), s, view, true);
        CHECK(y.shape() == Shape{2, 4, h, w});
      }
    }
    if (kind == NeckSpec::Kind::wasp) {
      auto streams = wasp_streams(random_tensor({1, 8, 5, 7}, rng), s, view, true);
      REQUIRE(streams.size() == 5);
      for (const Tensor& t : streams) CHECK(t.shape() == Shape{1, 4, 5, 7});
    }
    // Fresh running statistics (mean 0, variance 1) for the eval pass.
    ParameterSet fresh = initialised(neck_spec(s), 43);
    for (bool training : {true, false}) {
      Tensor z = neck_forward(Tensor::zeros({2, 8, 6, 6}), s, ParamView(fresh, "neck"), training);
      for (double v : z.data()) CHECK(v == 0.0);
    }
    CHECK_THROWS_AS(neck_forward(Tensor::zeros({1, 7, 4, 4}), s, view, true), DimensionError);
  }
  ParameterSet set = ParameterSet::allocate(neck_spec(neck(NeckSpec::Kind::aspp, 8, 4)));
  ParamView view(set, "neck");
  CHECK_THROWS_AS(wasp_forward(Tensor::zeros({1, 8, 4, 4}), neck(NeckSpec::Kind::aspp, 8, 4),
                               view, true),
                  UsageError);
}

TEST_CASE("waterfall receptive field") {
  NeckSpec s = neck(NeckSpec::Kind::wasp, 2, 1);
  ParameterSet set = ParameterSet::allocate(neck_spec(s));
  for (const char* stream : {"neck.s1.conv.weight", "neck.s2.conv.weight", "neck.s3.conv.weight"}) {
    for (double& v : set.at(stream).mutable_data()) v = 1.0;
  }
  ParamView view(set, "neck");
  const int size = 41, centre = 20;
  Tensor x = Tensor::zeros({1, 2, size, size});
  x.mutable_data()[x.shape().index(0, 0, centre, centre)] = 1.0;
  // Eval mode with unit running variance only rescales by 1/sqrt(1 + eps).
  auto streams = wasp_streams(x, s, view, false);
  const Tensor& s3 = streams[3];
  const int radius = s.rates[0] + s.rates[1] + s.rates[2];
  int lo = size, hi = -1;
  for (int y = 0; y < size; ++y) {
    for (int xx = 0; xx < size; ++xx) {
      const bool nonzero = s3.at(0, 0, y, xx) != 0.0;
      if (nonzero) {
        CHECK(std::abs(y - centre) <= radius);
        CHECK(std::abs(xx - centre) <= radius);
        if (y == centre) {
          lo = std::min(lo, xx);
          hi = std::max(hi, xx);
        }
      }
    }
  }
  CHECK(hi - lo + 1 == 1 + 2 * radius);
  // The parallel branch with the largest rate reaches only r3.
  NeckSpec a = neck(NeckSpec::Kind::aspp, 2, 1);
  ParameterSet aset = ParameterSet::allocate(neck_spec(a));
  for (double& v : aset.at("neck.b3.conv.weight").mutable_data()) v = 1.0;
  ParamView aview(aset, "neck");
  Tensor b3 = conv_bn_relu(x, aview, "b3", 1, a.rates[2], a.rates[2], false);
  int alo = size, ahi = -1;
  for (int xx = 0; xx < size; ++xx) {
    if (b3.at(0, 0, centre, xx) != 0.0) {
      alo = std::min(alo, xx);
      ahi = std::max(ahi, xx);
    }
  }
  CHECK(ahi - alo + 1 == 1 + 2 * a.rates[2]);
}

TEST_CASE("neck gradient checks") {
  for (auto kind : {NeckSpec::Kind::aspp, NeckSpec::Kind::wasp}) {
    CAPTURE(neck_kind_name(kind));
    const NeckSpec s = neck(kind, 8, 4);
    ParameterSet set = initialised(neck_spec(s), 51);
    randomise_affine(set, 52);
    ParamView view(set, "neck");
    std::mt19937_64 rng(53);
    Tensor x = random_tensor({1, 8, 8, 8}, rng);
    Tensor w = random_tensor({1, 4, 8, 8}, rng);
    for (bool training : {true, false}) {
      auto fx = [&](const Tensor& t) { return sum(mul(neck_forward(t, s, view, training), w)); };
      CHECK(finite_difference_check(fx, x) < 1e-5);
    }
    const std::string probe = kind == NeckSpec::Kind::aspp ? "neck.b2.conv.weight" : "neck.s2.conv.weight";
    Tensor saved = set.at(probe);
    auto fw = [&](const Tensor& t) {
      set.at(probe) = t;
      return sum(mul(neck_forward(x, s, view, true), w));
    };
    CHECK(finite_difference_check(fw, saved) < 1e-5);
    set.at(probe) = saved;
  }
}

TEST_CASE("residual block") {
  SUBCASE("zero residual path with identity shortcut is relu") {
    ParameterSet set = ParameterSet::allocate(residual_block_spec("r", 4, 4, 1));
    CHECK_FALSE(set.contains("r.proj.conv.weight"));
    std::mt19937_64 rng(61);
    Tensor x = random_tensor({2, 4, 6, 6}, rng);
    Tensor y = residual_block_forward(x, ParamView(set, "r"), 1, 1, true);
    Tensor r = relu(x);
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) ==
          std::vector<double>(r.data().begin(), r.data().end()));
  }
  SUBCASE("stride 2 halves with ceil semantics") {
    ParameterSet set = initialised(residual_block_spec("r", 4, 6, 2), 62);
    CHECK(set.contains("r.proj.conv.weight"));
    std::mt19937_64 rng(63);
    CHECK(residual_block_forward(random_tensor({1, 4, 8, 8}, rng), ParamView(set, "r"), 2, 1, true)
              .shape() == Shape{1, 6, 4, 4});
    CHECK(residual_block_forward(random_tensor({1, 4, 7, 9}, rng), ParamView(set, "r"), 2, 1, true)
              .shape() == Shape{1, 6, 4, 5});
  }
  SUBCASE("dilated stride-1 block keeps the size") {
    ParameterSet set = initialised(residual_block_spec("r", 4, 4, 1), 64);
    std::mt19937_64 rng(65);
    CHECK(residual_block_forward(random_tensor({1, 4, 5, 6}, rng), ParamView(set, "r"), 1, 2, true)
              .shape() == Shape{1, 4, 5, 6});
  }
  SUBCASE("gradient checks") {
    for (auto [in, out, stride] : {std::tuple{4, 4, 1}, std::tuple{4, 6, 2}}) {
      ParameterSet set = initialised(residual_block_spec("r", in, out, stride), 66);
      randomise_affine(set, 67);
      std::mt19937_64 rng(68);
      Tensor x = random_tensor({1, in, 8, 8}, rng);
      const int oh = stride == 1 ? 8 : 4;
      Tensor w = random_tensor({1, out, oh, oh}, rng);
      auto fn = [&](const Tensor& t) {
        return sum(mul(residual_block_forward(t, ParamView(set, "r"), stride, 1, true), w));
      };
      CHECK(finite_difference_check(fn, x) < 1e-5);
    }
  }
}
