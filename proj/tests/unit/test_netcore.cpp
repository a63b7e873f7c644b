#include "doctest.h"

#include <cmath>

#include "crlprune/dataset.hpp"
#include "crlprune/layers.hpp"
#include "crlprune/network.hpp"
#include "helpers.hpp"

using namespace crlprune;

TEST_CASE("1x1 conv with weight 2 reproduces the hand-computed map") {
  // single filter, weight 2, bias 0, all-ones 1x1x2x2 input -> every output 2
  const double in[4] = {1.0, 1.0, 1.0, 1.0};
  const double weight[1] = {2.0};
  const double bias[1] = {0.0};
  double out[4] = {};
  conv2d_forward(in, 1, 1, 2, 2, weight, bias, 1, 1, 1, 0, out);
  for (double v : out) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("conv output dims follow the usual formula") {
  CHECK(conv_out_dim(8, 3, 1, 0) == 6);
  CHECK(conv_out_dim(8, 3, 1, 1) == 8);
  CHECK(conv_out_dim(5, 3, 2, 0) == 2);
}

TEST_CASE("all-zero mask on a layer silences it for any input") {
  Rng rng(1);
  Network net = testutil::tiny_net(rng);
  Masks masks = net.masks();
  masks[0].assign(masks[0].size(), 0);
  net.apply_mask(masks);

  Rng data_rng(5);
  Tensor x = Tensor::zeros({2, 2, 5, 5});
  for (double& v : x.data) v = data_rng.normal();
  Tensor zero = Tensor::zeros({2, 2, 5, 5});

  // with layer 1 fully masked the input cannot reach the logits
  const Tensor a = net.forward(x);
  const Tensor b = net.forward(zero);
  REQUIRE(a.numel() == b.numel());
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("all-ones masks leave the forward pass bit-identical") {
  Rng rng(2);
  Network net = testutil::tiny_net(rng);
  Rng data_rng(6);
  Tensor x = Tensor::zeros({3, 2, 5, 5});
  for (double& v : x.data) v = data_rng.normal();

  const Tensor before = net.forward(x);
  Masks ones = net.masks();
  net.apply_mask(ones);
  const Tensor after = net.forward(x);
  for (std::size_t i = 0; i < before.numel(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("uniform logits give ln(2) cross-entropy for two classes") {
  Rng rng(3);
  Network net = testutil::tiny_net(rng);
  std::vector<double> params = net.get_parameters();
  // zero the head so all logits collapse to the bias
  const std::size_t head_params = 2 * net.head()[0].in_features + 2;
  for (std::size_t i = params.size() - head_params; i < params.size(); ++i) params[i] = 0.0;
  net.set_parameters(params);

  Tensor x = Tensor::zeros({4, 2, 5, 5});
  Rng data_rng(7);
  for (double& v : x.data) v = data_rng.normal();
  const double loss = net.loss(x, {0, 1, 0, 1});
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("analytic loss gradient matches central finite differences") {
  Rng rng(4);
  Network net = testutil::tiny_net(rng);
  Rng data_rng(8);
  Tensor x = Tensor::zeros({3, 2, 5, 5});
  for (double& v : x.data) v = data_rng.normal();
  const std::vector<int> labels = {0, 1, 1};

  NetGrad grad = net.make_grad();
  net.loss_with_gradient(x, labels, grad);
  std::vector<double> analytic;
  for (const Tensor& t : grad.tensors) {
    analytic.insert(analytic.end(), t.data.begin(), t.data.end());
  }

  const std::vector<double> numeric = testutil::finite_difference(
      [&]() { return net.get_parameters(); },
      [&](const std::vector<double>& p) { net.set_parameters(p); },
      [&]() { return net.loss(x, labels); }, 1e-4);

  CHECK(testutil::count_grad_mismatches(analytic, numeric, 1e-4) == 0);
}

TEST_CASE("200 optimizer steps solve a separable toy problem") {
  SyntheticSpec spec;
  spec.noise = 0.05;
  spec.height = spec.width = 8;
  Rng data_rng(9);
  const Dataset ds = make_synthetic_dataset(spec, 64, data_rng);

  Rng rng(10);
  Network net(InputShape{3, 8, 8}, {{4, 3, 1, 0}}, {}, 2, rng);
  NetOptimizer opt(net);
  double loss = 0.0;
  for (int step = 0; step < 200; ++step) {
    loss = net.train_step(ds.images, ds.labels, opt, 3e-3);
  }
  CHECK(loss < 0.1);
  CHECK(evaluate_accuracy(net, ds.images, ds.labels) == doctest::Approx(1.0));
}

TEST_CASE("constant logits break ties toward class 0") {
  Rng rng(11);
  Network net = testutil::tiny_net(rng);
  std::vector<double> params(net.parameter_count(), 0.0);
  net.set_parameters(params);  // logits identically zero

  Tensor x = Tensor::zeros({4, 2, 5, 5});
  x.fill(0.3);
  const std::vector<int> labels = {0, 1, 0, 1};  // balanced
  CHECK(evaluate_accuracy(net, x, labels) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("evaluate is deterministic and rejects empty data") {
  Rng rng(12);
  Network net = testutil::tiny_net(rng);
  Rng data_rng(13);
  Tensor x = Tensor::zeros({5, 2, 5, 5});
  for (double& v : x.data) v = data_rng.normal();
  const std::vector<int> labels = {0, 1, 0, 1, 1};
  CHECK(evaluate_accuracy(net, x, labels) == evaluate_accuracy(net, x, labels));
  CHECK_THROWS(evaluate_accuracy(net, x, {}));
}

TEST_CASE("apply_mask zeroes exactly the masked filter slices") {
  Rng rng(14);
  Network net(InputShape{1, 4, 4}, {{2, 3, 1, 1}}, {}, 2, rng);
  const Tensor weight_before = net.conv_layers()[0].weight;

  net.apply_mask({{1, 0}});
  const ConvLayer& layer = net.conv_layers()[0];
  const std::size_t slice = layer.weight.numel() / 2;
  for (std::size_t i = 0; i < slice; ++i) {
    CHECK(layer.weight[i] == weight_before[i]);  // filter 0 untouched
    CHECK(layer.weight[slice + i] == 0.0);       // filter 1 zeroed
  }
  CHECK(layer.bias[1] == 0.0);

  SUBCASE("idempotent") {
    const std::vector<double> once = net.get_parameters();
    net.apply_mask({{1, 0}});
    CHECK(net.get_parameters() == once);
  }
  SUBCASE("length mismatch rejected") {
    CHECK_THROWS(net.apply_mask({{1, 0, 1}}));
  }
}

TEST_CASE("masked filters stay exactly zero through training") {
  Rng rng(15);
  Network net = testutil::tiny_net(rng);
  Masks masks = net.masks();
  masks[0][1] = 0;
  masks[1][2] = 0;
  net.apply_mask(masks);

  Rng data_rng(16);
  Tensor x = Tensor::zeros({4, 2, 5, 5});
  for (double& v : x.data) v = data_rng.normal();
  const std::vector<int> labels = {0, 1, 1, 0};

  NetOptimizer opt(net);
  for (int step = 0; step < 25; ++step) net.train_step(x, labels, opt, 1e-2);

  const ConvLayer& l0 = net.conv_layers()[0];
  const std::size_t s0 = l0.weight.numel() / l0.mask.size();
  for (std::size_t i = 0; i < s0; ++i) CHECK(l0.weight[s0 + i] == 0.0);
  CHECK(l0.bias[1] == 0.0);
  const ConvLayer& l1 = net.conv_layers()[1];
  const std::size_t s1 = l1.weight.numel() / l1.mask.size();
  for (std::size_t i = 0; i < s1; ++i) CHECK(l1.weight[2 * s1 + i] == 0.0);
  CHECK(l1.bias[2] == 0.0);
}

TEST_CASE("fixed seed reproduces the loss trajectory bit for bit") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Network net = testutil::tiny_net(rng);
    Rng data_rng(seed + 1);
    Tensor x = Tensor::zeros({4, 2, 5, 5});
    for (double& v : x.data) v = data_rng.normal();
    const std::vector<int> labels = {0, 1, 0, 1};
    NetOptimizer opt(net);
    std::vector<double> losses;
    for (int i = 0; i < 20; ++i) losses.push_back(net.train_step(x, labels, opt, 1e-3));
    return losses;
  };
  CHECK(run(21) == run(21));
  CHECK(run(21) != run(22));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(17);
  Tensor logits = Tensor::zeros({6, 5});
  for (double& v : logits.data) v = rng.uniform(-30.0, 30.0);
  const Tensor p = softmax_rows(logits);
  for (int i = 0; i < 6; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 5; ++j) sum += p[static_cast<std::size_t>(i * 5 + j)];
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("train_step aborts on a non-finite loss") {
  Rng rng(18);
  Network net = testutil::tiny_net(rng);
  std::vector<double> params = net.get_parameters();
  params.back() = std::nan("");
  net.set_parameters(params);

  Tensor x = Tensor::zeros({2, 2, 5, 5});
  x.fill(1.0);
  NetOptimizer opt(net);
  CHECK_THROWS_WITH_AS(net.train_step(x, {0, 1}, opt, 1e-3),
                       doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("shape mismatches name the offending layer") {
  Rng rng(19);
  Network net = testutil::tiny_net(rng);

  Tensor wrong_channels = Tensor::zeros({1, 3, 5, 5});
  CHECK_THROWS_WITH_AS(net.forward(wrong_channels), doctest::Contains("layer 1"),
                       std::invalid_argument);

  Tensor too_small = Tensor::zeros({1, 2, 2, 2});
  CHECK_THROWS_AS(net.forward(too_small), std::invalid_argument);
}

TEST_CASE("train_step validates inputs") {
  Rng rng(20);
  Network net = testutil::tiny_net(rng);
  Tensor x = Tensor::zeros({2, 2, 5, 5});
  NetOptimizer opt(net);
  CHECK_THROWS(net.train_step(x, {0, 1}, opt, 0.0));
  CHECK_THROWS(net.train_step(x, {0, 5}, opt, 1e-3));
}
