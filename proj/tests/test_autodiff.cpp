#include "flowseg/autodiff.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

#include "flowseg/finite_diff.hpp"
#include "flowseg/rng.hpp"

using namespace flowseg;
namespace ad = flowseg::ad;

namespace {

// Builds loss = mean(result * weights) for a given primitive application so
// every output coordinate contributes with a distinct weight.
using Builder = std::function<ad::Node*(ad::Graph&, ad::Node*)>;

double weighted_loss_value(const Builder& apply, const Tensor& p, const Tensor& weights) {
  ad::Graph g;
  ad::Node* pn = g.leaf(p);
  ad::Node* out = apply(g, pn);
  ad::Node* w = g.leaf(weights);
  return ad::mean_all(ad::mul(out, w))->value(0);
}

Tensor analytic_gradient(const Builder& apply, const Tensor& p, const Tensor& weights) {
  ad::Graph g;
  ad::Node* pn = g.leaf(p, true);
  ad::Node* out = apply(g, pn);
  ad::Node* w = g.leaf(weights);
  g.backward(ad::mean_all(ad::mul(out, w)));
  return pn->grad;
}

double max_rel_error(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.numel(); ++i) {
    const double denom = std::max({std::abs(a.data[i]), std::abs(b.data[i]), 1e-3});
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]) / denom);
  }
  return worst;
}

void check_gradient(const char* name, const Builder& apply, const Tensor& p, Rng& rng) {
  ad::Graph probe_graph;
  ad::Node* probe = apply(probe_graph, probe_graph.leaf(p));
  Tensor weights = randn(probe->value.shape, rng);

  const Tensor analytic = analytic_gradient(apply, p, weights);
  const Tensor numeric = finite_difference_gradient(
      [&](const Tensor& q) { return weighted_loss_value(apply, q, weights); }, p, 1e-5);
  INFO("primitive: " << name);
  CHECK(max_rel_error(analytic, numeric) < 1e-4);
}

}  // namespace

TEST_CASE("matmul with identity returns the operand") {
  ad::Graph g;
  Tensor eye = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(3);
  Tensor a = randn({3, 3}, rng);
  ad::Node* out = ad::matmul(g.leaf(eye), g.leaf(a));
  CHECK((out->value.data == a.data).all());
}

TEST_CASE("conv2d with a zero kernel annihilates") {
  ad::Graph g;
  Rng rng(4);
  ad::Node* out = ad::conv2d(g.leaf(randn({2, 3, 4, 4}, rng)), g.leaf(Tensor::zeros({5, 3, 3, 3})));
  CHECK(out->value.shape == Shape{2, 5, 4, 4});
  CHECK((out->value.data == 0.0).all());
}

TEST_CASE("conv2d matches a direct sliding-window evaluation") {
  Rng rng(11);
  Tensor x = randn({1, 2, 5, 5}, rng);
  Tensor w = randn({3, 2, 3, 3}, rng);
  ad::Graph g;
  ad::Node* out = ad::conv2d(g.leaf(x), g.leaf(w));
  for (Eigen::Index co = 0; co < 3; ++co) {
    for (Eigen::Index y = 0; y < 5; ++y) {
      for (Eigen::Index xx = 0; xx < 5; ++xx) {
        double acc = 0.0;
        for (Eigen::Index ci = 0; ci < 2; ++ci) {
          for (Eigen::Index ky = 0; ky < 3; ++ky) {
            for (Eigen::Index kx = 0; kx < 3; ++kx) {
              const Eigen::Index sy = y + ky - 1, sx = xx + kx - 1;
              if (sy < 0 || sy >= 5 || sx < 0 || sx >= 5) continue;
              acc += x(0, ci, sy, sx) * w(co, ci, ky, kx);
            }
          }
        }
        CHECK(out->value(0, co, y, xx) == doctest::Approx(acc).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("channel concat stacks shapes") {
  ad::Graph g;
  ad::Node* out = ad::concat_channels(g.leaf(Tensor::full({1, 1, 4, 4}, 2.0)),
                                      g.leaf(Tensor::full({1, 1, 4, 4}, 5.0)));
  CHECK(out->value.shape == Shape{1, 2, 4, 4});
  CHECK(out->value(0, 0, 2, 2) == 2.0);
  CHECK(out->value(0, 1, 2, 2) == 5.0);
}

TEST_CASE("shape mismatches are rejected with a diagnostic") {
  ad::Graph g;
  Rng rng(5);
  ad::Node* a = g.leaf(randn({2, 3}, rng));
  ad::Node* b = g.leaf(randn({3, 3}, rng));
  CHECK_THROWS_WITH_AS(ad::add(a, b), doctest::Contains("add"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(ad::mul(a, b), doctest::Contains("[2,3]"), std::invalid_argument);
  CHECK_THROWS_AS(ad::matmul(b, a), std::invalid_argument);
  ad::Node* img = g.leaf(randn({1, 2, 4, 4}, rng));
  CHECK_THROWS_AS(ad::conv2d(img, g.leaf(randn({2, 3, 3, 3}, rng))), std::invalid_argument);
  CHECK_THROWS_AS(ad::channel_bias_add(img, g.leaf(randn({3}, rng))), std::invalid_argument);
  CHECK_THROWS_AS(ad::avg_pool2(g.leaf(randn({1, 1, 3, 4}, rng))), std::invalid_argument);
}

TEST_CASE("backward rejects non-scalar losses and reuse") {
  ad::Graph g;
  Rng rng(6);
  ad::Node* p = g.leaf(randn({2, 2}, rng), true);
  ad::Node* y = ad::square(p);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
  ad::Node* loss = ad::mean_all(y);
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), std::logic_error);
}

TEST_CASE("mean of squares has gradient 2x/n") {
  ad::Graph g;
  ad::Node* p = g.leaf(Tensor::from_values({1}, {3.0}), true);
  g.backward(ad::mean_all(ad::square(p)));
  CHECK(p->grad(0) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("unused parameters receive zero gradient") {
  ad::Graph g;
  Rng rng(7);
  ad::Node* used = g.leaf(randn({3}, rng), true);
  ad::Node* unused = g.leaf(randn({4}, rng), true);
  g.backward(ad::mean_all(ad::square(used)));
  CHECK(unused->grad.numel() == 0);  // never touched by the sweep
  CHECK(used->grad.numel() == 3);
}

TEST_CASE("every primitive matches finite differences") {
  Rng rng(2024);

  Tensor x4 = randn({1, 2, 4, 4}, rng);
  Tensor y4 = randn({1, 2, 4, 4}, rng);
  Tensor m = randn({3, 4}, rng);

  check_gradient("add", [&](ad::Graph& g, ad::Node* p) { return ad::add(p, g.leaf(y4)); }, x4, rng);
  check_gradient("multiply", [&](ad::Graph& g, ad::Node* p) { return ad::mul(p, g.leaf(y4)); }, x4,
                 rng);
  check_gradient("scalar-multiply",
                 [&](ad::Graph&, ad::Node* p) { return ad::scalar_mul(p, -1.7); }, x4, rng);
  check_gradient("matmul-lhs",
                 [&](ad::Graph& g, ad::Node* p) { return ad::matmul(p, g.leaf(randn({4, 2}, rng))); },
                 m, rng);
  check_gradient("matmul-rhs",
                 [&](ad::Graph& g, ad::Node* p) { return ad::matmul(g.leaf(m), p); },
                 randn({4, 2}, rng), rng);
  check_gradient("conv2d-input",
                 [&](ad::Graph& g, ad::Node* p) { return ad::conv2d(p, g.leaf(randn({3, 2, 3, 3}, rng))); },
                 x4, rng);
  check_gradient("conv2d-kernel",
                 [&](ad::Graph& g, ad::Node* p) { return ad::conv2d(g.leaf(x4), p); },
                 randn({3, 2, 3, 3}, rng), rng);
  check_gradient("channel-bias-add-x",
                 [&](ad::Graph& g, ad::Node* p) { return ad::channel_bias_add(p, g.leaf(randn({2}, rng))); },
                 x4, rng);
  check_gradient("channel-bias-add-b",
                 [&](ad::Graph& g, ad::Node* p) { return ad::channel_bias_add(g.leaf(x4), p); },
                 randn({2}, rng), rng);
  check_gradient("channel-concat",
                 [&](ad::Graph& g, ad::Node* p) { return ad::concat_channels(p, g.leaf(y4)); }, x4,
                 rng);
  check_gradient("avg-pool2", [&](ad::Graph&, ad::Node* p) { return ad::avg_pool2(p); }, x4, rng);
  check_gradient("upsample2", [&](ad::Graph&, ad::Node* p) { return ad::upsample2(p); }, x4, rng);
  check_gradient("silu", [&](ad::Graph&, ad::Node* p) { return ad::silu(p); }, x4, rng);
  check_gradient("square", [&](ad::Graph&, ad::Node* p) { return ad::square(p); }, x4, rng);
  check_gradient("mean-reduce", [&](ad::Graph&, ad::Node* p) { return ad::mean_all(p); }, x4, rng);
  check_gradient("reshape", [&](ad::Graph&, ad::Node* p) { return ad::reshape(p, {4, 8}); }, x4,
                 rng);
}

TEST_CASE("two-layer network gradient matches finite differences") {
  Rng rng(31);
  Tensor x = randn({4, 3}, rng);
  Tensor w2 = randn({5, 1}, rng);

  auto apply = [&](ad::Graph& g, ad::Node* w1) {
    ad::Node* h = ad::silu(ad::matmul(g.leaf(x), w1));  // [4,5]
    ad::Node* out = ad::matmul(h, g.leaf(w2));          // [4,1]
    return ad::mean_all(ad::square(out));
  };

  Tensor w1 = randn({3, 5}, rng);
  ad::Graph g;
  ad::Node* w1n = g.leaf(w1, true);
  g.backward(apply(g, w1n));

  Tensor numeric = finite_difference_gradient(
      [&](const Tensor& q) {
        ad::Graph gg;
        return apply(gg, gg.leaf(q))->value(0);
      },
      w1, 1e-5);
  CHECK(max_rel_error(w1n->grad, numeric) < 1e-4);
}

TEST_CASE("op sequences are deterministic") {
  auto run = [] {
    Rng rng(555);
    ad::Graph g;
    ad::Node* a = g.leaf(randn({2, 3, 4, 4}, rng), true);
    ad::Node* w = g.leaf(randn({3, 3, 3, 3}, rng), true);
    ad::Node* out = ad::avg_pool2(ad::silu(ad::conv2d(a, w)));
    ad::Node* loss = ad::mean_all(ad::square(out));
    g.backward(loss);
    return std::tuple{loss->value(0), a->grad.data.sum(), w->grad.data.sum()};
  };
  auto r1 = run();
  auto r2 = run();
  CHECK(std::get<0>(r1) == std::get<0>(r2));
  CHECK(std::get<1>(r1) == std::get<1>(r2));
  CHECK(std::get<2>(r1) == std::get<2>(r2));
}

TEST_CASE("finite_difference_gradient on elementary functions") {
  Tensor p = Tensor::from_values({2}, {1.0, 2.0});
  Tensor g1 = finite_difference_gradient(
      [](const Tensor& t) { return t.data.sum(); }, p, 1e-5);
  CHECK(std::abs(g1(0) - 1.0) < 1e-8);
  CHECK(std::abs(g1(1) - 1.0) < 1e-8);

  Tensor g2 = finite_difference_gradient(
      [](const Tensor& t) { return t.data.square().sum(); }, p, 1e-5);
  CHECK(std::abs(g2(0) - 2.0) < 1e-6);
  CHECK(std::abs(g2(1) - 4.0) < 1e-6);

  CHECK_THROWS_AS(finite_difference_gradient([](const Tensor& t) { return t.data.sum(); }, p, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(finite_difference_gradient(
                      [](const Tensor&) { return std::numeric_limits<double>::infinity(); }, p, 1e-5),
                  std::runtime_error);
}
