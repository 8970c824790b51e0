#include "flowseg/net.hpp"

#include <doctest.h>

#include <cmath>

#include "flowseg/finite_diff.hpp"
#include "flowseg/rng.hpp"

using namespace flowseg;
namespace ad = flowseg::ad;

namespace {

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.mask_channels = 1;
  c.cond_channels = 1;
  c.image_size = 8;
  c.base_width = 2;
  c.depth = 2;
  c.time_embed_dim = 4;
  return c;
}

}  // namespace

TEST_CASE("time embedding at t=0 is the sin/cos zero pattern") {
  TimeEmbedding e = time_embed(0.0, 8);
  for (int i = 0; i < 4; ++i) {
    CHECK(e.features(i) == 0.0);
    CHECK(e.features(4 + i) == 1.0);
  }
}

TEST_CASE("time embedding is deterministic and injective on the endpoints") {
  Tensor a = time_embed(0.5, 16).features;
  Tensor b = time_embed(0.5, 16).features;
  CHECK((a.data == b.data).all());

  Tensor t0 = time_embed(0.0, 16).features;
  Tensor t1 = time_embed(1.0, 16).features;
  CHECK_FALSE((t0.data == t1.data).all());
  CHECK_FALSE((t0.data == a.data).all());
  CHECK_FALSE((t1.data == a.data).all());
  CHECK(a.all_finite());
}

TEST_CASE("time embedding rejects t outside [0,1]") {
  CHECK_THROWS_AS(time_embed(-0.01, 8), std::invalid_argument);
  CHECK_THROWS_AS(time_embed(1.01, 8), std::invalid_argument);
}

TEST_CASE("init_params is deterministic in the seed") {
  NetworkConfig c = tiny_config();
  VelocityNetParams a = init_params(c, 7);
  VelocityNetParams b = init_params(c, 7);
  REQUIRE(a.tensors.size() == b.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    CHECK((a.tensors[i].data == b.tensors[i].data).all());
  }
  VelocityNetParams other = init_params(c, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    any_diff |= !(a.tensors[i].data == other.tensors[i].data).all();
  }
  CHECK(any_diff);
  CHECK(a.all_finite());
}

TEST_CASE("parameter count matches the closed-form layer sum") {
  NetworkConfig c;
  c.mask_channels = 1;
  c.cond_channels = 1;
  c.image_size = 16;
  c.base_width = 16;
  c.depth = 2;
  c.time_embed_dim = 32;
  VelocityNetParams p = init_params(c, 0);

  // independent tally from the architecture recipe
  auto conv = [](long out, long in) { return out * in * 9 + out; };
  auto stage = [&](long in, long ch) { return conv(ch, in) + (ch * 32 + ch) + conv(ch, ch); };
  const long expected = (32 * 32 + 32)        // time affine
                        + stage(2, 16)        // enc0 (mask + cond channels in)
                        + stage(16, 32)       // enc1
                        + stage(32, 64)       // middle
                        + stage(64 + 32, 32)  // dec1 (upsampled + skip)
                        + stage(32 + 16, 16)  // dec0
                        + conv(1, 16);        // head
  CHECK(expected == 124593);
  CHECK(p.total_count() == expected);

  // count is a pure function of the config, not the seed
  CHECK(init_params(c, 999).total_count() == expected);
}

TEST_CASE("all-zero params give the zero velocity field") {
  NetworkConfig c = tiny_config();
  VelocityNetParams p = init_params(c, 1);
  for (Tensor& t : p.tensors) t.data.setZero();
  Rng rng(2);
  Tensor s = randn({2, 1, 8, 8}, rng);
  Tensor x = randn({2, 1, 8, 8}, rng);
  Tensor u = forward(p, 0.3, s, &x);
  CHECK(u.shape == Shape{2, 1, 8, 8});
  CHECK((u.data == 0.0).all());
}

TEST_CASE("freshly initialized params start at the zero velocity field") {
  // head conv is zero-initialized, so the whole net outputs zero
  NetworkConfig c = tiny_config();
  VelocityNetParams p = init_params(c, 3);
  Rng rng(4);
  Tensor s = randn({1, 1, 8, 8}, rng);
  Tensor x = randn({1, 1, 8, 8}, rng);
  CHECK((forward(p, 0.7, s, &x).data == 0.0).all());
}

TEST_CASE("output shape follows the state batch") {
  NetworkConfig c = tiny_config();
  c.image_size = 16;
  VelocityNetParams p = init_params(c, 5);
  Rng rng(6);
  Tensor s = randn({2, 1, 16, 16}, rng);
  Tensor x = randn({2, 1, 16, 16}, rng);
  CHECK(forward(p, 0.5, s, &x).shape == Shape{2, 1, 16, 16});
}

TEST_CASE("absent condition equals explicit zero condition bit for bit") {
  NetworkConfig c = tiny_config();
  VelocityNetParams p = init_params(c, 9);
  Rng rng(10);
  Tensor s = randn({1, 1, 8, 8}, rng);
  Tensor zeros = Tensor::zeros({1, 1, 8, 8});
  Tensor u_absent = forward(p, 0.25, s, nullptr);
  Tensor u_zero = forward(p, 0.25, s, &zeros);
  CHECK((u_absent.data == u_zero.data).all());
}

TEST_CASE("shape mismatches are rejected") {
  NetworkConfig c = tiny_config();
  VelocityNetParams p = init_params(c, 11);
  Rng rng(12);
  Tensor bad = randn({1, 1, 4, 4}, rng);
  CHECK_THROWS_AS(forward(p, 0.5, bad, nullptr), std::invalid_argument);
  Tensor s = randn({1, 1, 8, 8}, rng);
  Tensor bad_cond = randn({1, 2, 8, 8}, rng);
  CHECK_THROWS_AS(forward(p, 0.5, s, &bad_cond), std::invalid_argument);
}

TEST_CASE("invalid configs are rejected") {
  NetworkConfig c = tiny_config();
  c.image_size = 6;  // not divisible by 4
  CHECK_THROWS_AS(init_params(c, 0), std::invalid_argument);
  c = tiny_config();
  c.time_embed_dim = 5;
  CHECK_THROWS_AS(init_params(c, 0), std::invalid_argument);
  c = tiny_config();
  c.depth = 0;
  CHECK_THROWS_AS(init_params(c, 0), std::invalid_argument);
}

TEST_CASE("guidance combination obeys u_c + w(u_c - u_u)") {
  NetworkConfig c = tiny_config();
  VelocityNetParams p = init_params(c, 13);
  // give the head nonzero weights so conditional and unconditional differ
  Rng wiggle(14);
  for (std::size_t i = 0; i < p.names.size(); ++i) {
    if (p.names[i] == "head.w") p.tensors[i] = randn(p.tensors[i].shape, wiggle);
  }
  Rng rng(15);
  Tensor s = randn({1, 1, 8, 8}, rng);
  Tensor x = randn({1, 1, 8, 8}, rng);

  Tensor u_c = forward(p, 0.4, s, &x);
  Tensor u_u = forward(p, 0.4, s, nullptr);
  REQUIRE_FALSE((u_c.data == u_u.data).all());

  const double w = 0.3;
  Tensor guided = guided_velocity(p, 0.4, s, x, w);
  Tensor expected(u_c.shape, u_c.data + w * (u_c.data - u_u.data));
  CHECK((guided.data == expected.data).all());

  // w = 0 returns the conditional branch bit-exactly
  CHECK((guided_velocity(p, 0.4, s, x, 0.0).data == u_c.data).all());
}

TEST_CASE("guidance is inert when both branches agree") {
  NetworkConfig c = tiny_config();
  VelocityNetParams p = init_params(c, 16);
  for (Tensor& t : p.tensors) t.data.setZero();
  Rng rng(17);
  Tensor s = randn({1, 1, 8, 8}, rng);
  Tensor x = randn({1, 1, 8, 8}, rng);
  for (double w : {0.0, 0.3, 2.0, -1.0}) {
    CHECK((guided_velocity(p, 0.5, s, x, w).data == 0.0).all());
  }
}

TEST_CASE("network gradient wrt every parameter matches finite differences") {
  NetworkConfig c = tiny_config();
  VelocityNetParams p = init_params(c, 18);
  // random head so the output path is active
  Rng wiggle(19);
  for (std::size_t i = 0; i < p.names.size(); ++i) {
    if (p.names[i].rfind("head.", 0) == 0) p.tensors[i] = randn(p.tensors[i].shape, wiggle);
  }
  Rng rng(20);
  Tensor s = randn({1, 1, 8, 8}, rng);
  Tensor x = randn({1, 1, 8, 8}, rng);
  const double t = 0.6;

  auto loss_with = [&](const VelocityNetParams& q) {
    ad::Graph g;
    auto nodes = bind_params(g, q, false);
    ad::Node* out = forward_node(g, nodes, c, t, g.leaf(s), g.leaf(x));
    return ad::mean_all(ad::square(out))->value(0);
  };

  ad::Graph g;
  auto nodes = bind_params(g, p, true);
  ad::Node* out = forward_node(g, nodes, c, t, g.leaf(s), g.leaf(x));
  g.backward(ad::mean_all(ad::square(out)));

  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    VelocityNetParams probe = p;
    Tensor numeric = finite_difference_gradient(
        [&](const Tensor& q) {
          probe.tensors[i] = q;
          return loss_with(probe);
        },
        p.tensors[i], 1e-5);
    const Tensor& analytic = nodes[i]->grad;
    REQUIRE(analytic.same_shape(numeric));
    double worst = 0.0;
    for (Eigen::Index j = 0; j < numeric.numel(); ++j) {
      const double denom = std::max({std::abs(analytic.data[j]), std::abs(numeric.data[j]), 1e-3});
      worst = std::max(worst, std::abs(analytic.data[j] - numeric.data[j]) / denom);
    }
    INFO("param: " << p.names[i]);
    CHECK(worst < 1e-4);
  }
}
