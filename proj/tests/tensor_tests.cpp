#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "spdnet/nn.hpp"
#include "spdnet/ops.hpp"
#include "spdnet/tensor.hpp"
#include "test_util.hpp"

using namespace spdnet;
using testutil::max_grad_rel_err;
using testutil::random_tensor;
using testutil::rel_err;

namespace {

// Weighted scalar readout so gradient checks see generic upstream gradients.
Tensor weighted_sum(const Tensor& x, const Tensor& w) { return sum_all(mul(x, w)); }

}  // namespace

TEST_CASE("tensor construction validates shape and finiteness") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), std::runtime_error);
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.at({1, 2}) == 6.0);
}

TEST_CASE("matmul identity and hand arithmetic") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor v({2, 1}, {3, 4});
  Tensor out = matmul(eye, v);
  CHECK(out.values() == std::vector<double>{3, 4});

  Tensor row({1, 2}, {1, 2});
  Tensor col({2, 1}, {3, 4});
  CHECK(matmul(row, col).item() == doctest::Approx(11.0));
}

TEST_CASE("matmul rejects mismatched shapes with both shapes named") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({2, 2}, {1, 2, 3, 4});
  try {
    matmul(a, b);
    FAIL("expected shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[2,2]") != std::string::npos);
  }
}

TEST_CASE("matmul gradients match finite differences") {
  std::mt19937_64 rng(7);
  Tensor a = random_tensor(rng, {4, 5}, true);
  Tensor b = random_tensor(rng, {5, 3}, true);
  Tensor w = random_tensor(rng, {4, 3});
  auto loss = [&] { return weighted_sum(matmul(a, b), w); };
  CHECK(max_grad_rel_err(loss, {a, b}) < 1e-4);
}

TEST_CASE("batched matmul against shared rhs and batched both sides") {
  std::mt19937_64 rng(8);
  Tensor a = random_tensor(rng, {2, 3, 4}, true);
  Tensor b2d = random_tensor(rng, {4, 5}, true);
  Tensor w = random_tensor(rng, {2, 3, 5});
  auto loss = [&] { return weighted_sum(matmul(a, b2d), w); };
  CHECK(max_grad_rel_err(loss, {a, b2d}) < 1e-4);

  Tensor b3d = random_tensor(rng, {2, 4, 5}, true);
  auto loss2 = [&] { return weighted_sum(matmul(a, b3d), w); };
  CHECK(max_grad_rel_err(loss2, {a, b3d}) < 1e-4);
}

TEST_CASE("conv1d identity kernel and hand arithmetic") {
  Tensor x({1, 1, 3}, {1, 2, 3});
  Tensor k({1, 1, 1}, {1});
  CHECK(conv1d(x, k, Padding::kSame).values() == std::vector<double>{1, 2, 3});

  Tensor x2({1, 1, 4}, {1, 2, 3, 4});
  Tensor k2({1, 1, 2}, {1, 1});
  CHECK(conv1d(x2, k2, Padding::kValid).values() == std::vector<double>{3, 5, 7});
}

TEST_CASE("conv1d rejects kernels wider than the valid input") {
  Tensor x({1, 1, 3}, {1, 2, 3});
  Tensor k({1, 1, 5}, {1, 1, 1, 1, 1});
  CHECK_THROWS_AS(conv1d(x, k, Padding::kValid), std::invalid_argument);
}

TEST_CASE("conv1d gradients match finite differences") {
  std::mt19937_64 rng(9);
  Tensor x = random_tensor(rng, {2, 3, 16}, true);
  Tensor k = random_tensor(rng, {4, 3, 5}, true);
  for (Padding pad : {Padding::kSame, Padding::kValid}) {
    Tensor probe = random_tensor(rng, conv1d(x, k, pad).shape());
    auto loss = [&] { return weighted_sum(conv1d(x, k, pad), probe); };
    CHECK(max_grad_rel_err(loss, {x, k}) < 1e-4);
  }
}

TEST_CASE("depthwise conv1d convolves each channel independently") {
  Tensor x({1, 2, 4}, {1, 2, 3, 4, 10, 20, 30, 40});
  Tensor k({2, 1}, {1, 2});  // channel 0 copies, channel 1 doubles
  Tensor out = depthwise_conv1d(x, k, Padding::kSame);
  CHECK(out.values() == std::vector<double>{1, 2, 3, 4, 20, 40, 60, 80});

  std::mt19937_64 rng(10);
  Tensor xr = random_tensor(rng, {2, 3, 12}, true);
  Tensor kr = random_tensor(rng, {3, 5}, true);
  Tensor probe = random_tensor(rng, {2, 3, 12});
  auto loss = [&] { return weighted_sum(depthwise_conv1d(xr, kr, Padding::kSame), probe); };
  CHECK(max_grad_rel_err(loss, {xr, kr}) < 1e-4);
}

TEST_CASE("conv2d identity, hand arithmetic and gradients") {
  Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k({1, 1, 1, 1}, {1});
  CHECK(conv2d(x, k, Padding::kSame).values() == x.values());

  Tensor ones({1, 1, 2, 2}, {1, 1, 1, 1});
  Tensor kk({1, 1, 2, 2}, {1, 1, 1, 1});
  CHECK(conv2d(ones, kk, Padding::kValid).item() == doctest::Approx(4.0));

  std::mt19937_64 rng(11);
  Tensor xr = random_tensor(rng, {2, 1, 6, 4}, true);
  Tensor kr = random_tensor(rng, {1, 1, 3, 3}, true);
  Tensor probe = random_tensor(rng, {2, 1, 6, 4});
  auto loss = [&] { return weighted_sum(conv2d(xr, kr, Padding::kSame), probe); };
  CHECK(max_grad_rel_err(loss, {xr, kr}) < 1e-4);
}

TEST_CASE("softmax symmetry, stability and extended-precision oracle") {
  Tensor flat = softmax(Tensor({2}, {0, 0}), 0);
  CHECK(flat.values()[0] == doctest::Approx(0.5));
  CHECK(flat.values()[1] == doctest::Approx(0.5));

  Tensor big = softmax(Tensor({2}, {1000, 1000}), 0);
  CHECK(big.values()[0] == doctest::Approx(0.5));

  std::mt19937_64 rng(12);
  Tensor x = random_tensor(rng, {3}, false, -3.0, 3.0);
  Tensor y = softmax(x, 0);
  // direct formula in long double
  long double denom = 0.0L;
  for (double v : x.values()) denom += expl(static_cast<long double>(v));
  for (std::size_t i = 0; i < 3; ++i) {
    const long double expect = expl(static_cast<long double>(x.values()[i])) / denom;
    CHECK(rel_err(y.values()[i], static_cast<double>(expect)) < 1e-12);
  }
}

TEST_CASE("softmax rows are a probability distribution") {
  std::mt19937_64 rng(13);
  for (int round = 0; round < 20; ++round) {
    Tensor x = random_tensor(rng, {3, 5, 4}, false, -5.0, 5.0);
    const std::size_t axis = static_cast<std::size_t>(round % 3);
    Tensor y = softmax(x, axis);
    for (double v : y.values()) CHECK(v >= 0.0);
    // sum along axis
    const auto& s = y.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        double sum = 0.0;
        for (std::size_t a = 0; a < s[axis]; ++a) sum += y.values()[(o * s[axis] + a) * inner + in];
        CHECK(std::abs(sum - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("softmax gradients match finite differences") {
  std::mt19937_64 rng(14);
  Tensor x = random_tensor(rng, {2, 6}, true);
  Tensor probe = random_tensor(rng, {2, 6});
  auto loss = [&] { return weighted_sum(softmax(x, 1), probe); };
  CHECK(max_grad_rel_err(loss, {x}) < 1e-4);
}

TEST_CASE("layer_norm handles constant and pre-normalized input") {
  Tensor gain = Tensor::full({4}, 1.0, true);
  Tensor bias = Tensor::zeros({4}, true);
  Tensor constant({1, 4}, {3, 3, 3, 3});
  Tensor normed = layer_norm(constant, gain, bias);
  for (double v : normed.values()) CHECK(v == doctest::Approx(0.0));

  Tensor gain2 = Tensor::full({2}, 1.0, true);
  Tensor bias2 = Tensor::zeros({2}, true);
  Tensor pm({1, 2}, {-1, 1});
  Tensor out = layer_norm(pm, gain2, bias2, 1e-12);
  CHECK(out.values()[0] == doctest::Approx(-1.0));
  CHECK(out.values()[1] == doctest::Approx(1.0));
}

TEST_CASE("layer_norm gradients match finite differences") {
  std::mt19937_64 rng(15);
  Tensor x = random_tensor(rng, {2, 8}, true);
  Tensor gain = random_tensor(rng, {8}, true, 0.5, 1.5);
  Tensor bias = random_tensor(rng, {8}, true);
  Tensor probe = random_tensor(rng, {2, 8});
  auto loss = [&] { return weighted_sum(layer_norm(x, gain, bias), probe); };
  CHECK(max_grad_rel_err(loss, {x, gain, bias}) < 1e-4);
}

TEST_CASE("elementwise suite basics") {
  Tensor r = reshape(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), {3, 2});
  CHECK(r.values() == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(r.shape() == std::vector<std::size_t>{3, 2});
  CHECK_THROWS_AS(reshape(r, {4, 2}), std::invalid_argument);

  Tensor padded = pad_to(Tensor({2}, {1, 2}), 0, 4);
  CHECK(padded.values() == std::vector<double>{1, 2, 0, 0});

  Tensor joined = concat({Tensor({1}, {1}), Tensor({1}, {2})}, 0);
  CHECK(joined.values() == std::vector<double>{1, 2});

  CHECK_THROWS_AS(slice(Tensor({3}, {1, 2, 3}), 1, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(softmax(Tensor({3}, {1, 2, 3}), 2), std::invalid_argument);
}

TEST_CASE("reshape and permute invert themselves") {
  std::mt19937_64 rng(16);
  Tensor x = random_tensor(rng, {2, 3, 4});
  Tensor back = reshape(reshape(x, {4, 3, 2}), {2, 3, 4});
  CHECK(back.values() == x.values());

  Tensor p = permute(x, {2, 0, 1});
  Tensor unp = permute(p, {1, 2, 0});
  CHECK(unp.values() == x.values());
  CHECK(unp.shape() == x.shape());
}

TEST_CASE("permute moves elements where expected") {
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = permute(x, {1, 0});
  CHECK(t.shape() == std::vector<std::size_t>{3, 2});
  CHECK(t.values() == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("layout ops propagate gradients") {
  std::mt19937_64 rng(17);
  Tensor x = random_tensor(rng, {2, 3, 4}, true);
  Tensor probe = random_tensor(rng, {3, 8});
  auto loss = [&] {
    Tensor t = permute(x, {1, 0, 2});       // [3,2,4]
    t = reshape(t, {3, 8});
    return weighted_sum(t, probe);
  };
  CHECK(max_grad_rel_err(loss, {x}) < 1e-4);

  Tensor probe2 = random_tensor(rng, {2, 2, 4});
  auto loss2 = [&] { return weighted_sum(slice(x, 1, 1, 2), probe2); };
  CHECK(max_grad_rel_err(loss2, {x}) < 1e-4);

  Tensor probe3 = random_tensor(rng, {2, 5, 4});
  auto loss3 = [&] { return weighted_sum(pad_to(x, 1, 5), probe3); };
  CHECK(max_grad_rel_err(loss3, {x}) < 1e-4);

  Tensor y = random_tensor(rng, {2, 2, 4}, true);
  Tensor probe4 = random_tensor(rng, {2, 5, 4});
  auto loss4 = [&] { return weighted_sum(concat({x, y}, 1), probe4); };
  CHECK(max_grad_rel_err(loss4, {x, y}) < 1e-4);
}

TEST_CASE("activation gradients match finite differences") {
  std::mt19937_64 rng(18);
  Tensor x = random_tensor(rng, {4, 5}, true, -2.0, 2.0);
  Tensor probe = random_tensor(rng, {4, 5});
  auto loss_g = [&] { return weighted_sum(gelu(x), probe); };
  CHECK(max_grad_rel_err(loss_g, {x}) < 1e-4);

  // keep relu away from the kink
  Tensor xr({2, 2}, {-1.5, -0.3, 0.4, 2.0});
  Tensor xrt = Tensor(xr.shape(), xr.values(), true);
  Tensor probe2 = random_tensor(rng, {2, 2});
  auto loss_r = [&] { return weighted_sum(relu(xrt), probe2); };
  CHECK(max_grad_rel_err(loss_r, {xrt}) < 1e-4);
}

TEST_CASE("backward of linear and quadratic expressions") {
  Tensor p({2}, {1, 2}, true);
  Tensor loss = sum_all(p);
  loss.backward();
  CHECK(p.grad() == std::vector<double>{1, 1});

  p.zero_grad();
  Tensor loss2 = sum_all(mul(p, p));
  loss2.backward();
  CHECK(p.grad()[0] == doctest::Approx(2.0));
  CHECK(p.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar loss and accumulates until zeroed") {
  Tensor p({2}, {1, 2}, true);
  CHECK_THROWS_AS(mul(p, p).backward(), std::invalid_argument);

  sum_all(p).backward();
  sum_all(p).backward();
  CHECK(p.grad() == std::vector<double>{2, 2});  // two passes accumulate
  p.zero_grad();
  sum_all(p).backward();
  CHECK(p.grad() == std::vector<double>{1, 1});
}

TEST_CASE("a node feeding two consumers sums both gradient contributions") {
  std::mt19937_64 rng(19);
  Tensor x = random_tensor(rng, {3}, true);
  Tensor probe = random_tensor(rng, {3});
  auto loss = [&] {
    Tensor doubled = scale(x, 2.0);
    Tensor squared = mul(x, x);
    return weighted_sum(add(doubled, squared), probe);
  };
  CHECK(max_grad_rel_err(loss, {x}) < 1e-4);
}

TEST_CASE("suffix-broadcast add routes bias gradients") {
  std::mt19937_64 rng(20);
  Tensor x = random_tensor(rng, {2, 3, 4}, true);
  Tensor b = random_tensor(rng, {4}, true);
  Tensor probe = random_tensor(rng, {2, 3, 4});
  auto loss = [&] { return weighted_sum(add(x, b), probe); };
  CHECK(max_grad_rel_err(loss, {x, b}) < 1e-4);
  CHECK_THROWS_AS(add(Tensor({3}, {1, 2, 3}), Tensor({2}, {1, 2})), std::invalid_argument);
}

TEST_CASE("scale_by propagates to the scalar") {
  std::mt19937_64 rng(21);
  Tensor x = random_tensor(rng, {2, 3}, true);
  Tensor s = Tensor::scalar(0.7, true);
  Tensor probe = random_tensor(rng, {2, 3});
  auto loss = [&] { return weighted_sum(scale_by(x, s), probe); };
  CHECK(max_grad_rel_err(loss, {x, s}) < 1e-4);
}

TEST_CASE("operations refuse to emit non-finite values") {
  Tensor huge({1}, {1e308});
  CHECK_THROWS_AS(mul(huge, huge), std::runtime_error);
}

TEST_CASE("layer_norm requires a positive eps") {
  Tensor x({1, 2}, {1, 2});
  Tensor g = Tensor::full({2}, 1.0);
  Tensor b = Tensor::zeros({2});
  CHECK_THROWS_AS(layer_norm(x, g, b, 0.0), std::invalid_argument);
}

TEST_CASE("gradients match finite differences across three shapes per op") {
  std::mt19937_64 rng(55);
  // conv1d
  for (auto [batch, ch, len, oc, kw] :
       {std::tuple{1, 1, 8, 1, 3}, {3, 2, 10, 2, 5}, {2, 4, 7, 3, 1}}) {
    Tensor x = random_tensor(rng, {static_cast<std::size_t>(batch), static_cast<std::size_t>(ch),
                                   static_cast<std::size_t>(len)}, true);
    Tensor k = random_tensor(rng, {static_cast<std::size_t>(oc), static_cast<std::size_t>(ch),
                                   static_cast<std::size_t>(kw)}, true);
    Tensor probe = random_tensor(rng, conv1d(x, k, Padding::kSame).shape());
    auto loss = [&] { return weighted_sum(conv1d(x, k, Padding::kSame), probe); };
    CHECK(max_grad_rel_err(loss, {x, k}) < 1e-4);
  }
  // conv2d
  for (auto [h, w, kh, kw] : {std::tuple{5, 4, 3, 3}, {6, 6, 1, 3}, {4, 7, 3, 1}}) {
    Tensor x = random_tensor(rng, {2, 1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)}, true);
    Tensor k = random_tensor(rng, {1, 1, static_cast<std::size_t>(kh), static_cast<std::size_t>(kw)}, true);
    Tensor probe = random_tensor(rng, x.shape());
    auto loss = [&] { return weighted_sum(conv2d(x, k, Padding::kSame), probe); };
    CHECK(max_grad_rel_err(loss, {x, k}) < 1e-4);
  }
  // softmax and layer_norm
  for (auto shape : {std::vector<std::size_t>{5}, {3, 4}, {2, 3, 6}}) {
    Tensor x = random_tensor(rng, shape, true);
    Tensor probe = random_tensor(rng, shape);
    auto loss_s = [&] { return weighted_sum(softmax(x, shape.size() - 1), probe); };
    CHECK(max_grad_rel_err(loss_s, {x}) < 1e-4);

    Tensor gain = random_tensor(rng, {shape.back()}, true, 0.5, 1.5);
    Tensor bias = random_tensor(rng, {shape.back()}, true);
    auto loss_n = [&] { return weighted_sum(layer_norm(x, gain, bias), probe); };
    CHECK(max_grad_rel_err(loss_n, {x, gain, bias}) < 1e-4);
  }
  // matmul (third shape beyond the dedicated cases above)
  for (auto [m, k, n] : {std::tuple{1, 7, 2}, {6, 1, 5}, {3, 3, 3}}) {
    Tensor a = random_tensor(rng, {static_cast<std::size_t>(m), static_cast<std::size_t>(k)}, true);
    Tensor b = random_tensor(rng, {static_cast<std::size_t>(k), static_cast<std::size_t>(n)}, true);
    Tensor probe = random_tensor(rng, {static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
    auto loss = [&] { return weighted_sum(matmul(a, b), probe); };
    CHECK(max_grad_rel_err(loss, {a, b}) < 1e-4);
  }
}

// ----------------------------------------------------------------------------
// Adam
// ----------------------------------------------------------------------------

TEST_CASE("adam leaves parameters untouched on zero gradient") {
  Parameter p{"p", Tensor({2}, {1.0, -2.0}, true)};
  Adam opt({p}, 0.1);
  sum_all(scale(p.value, 0.0)).backward();  // gradient identically zero
  opt.step();
  CHECK(p.value.values()[0] == doctest::Approx(1.0));
  CHECK(p.value.values()[1] == doctest::Approx(-2.0));
}

TEST_CASE("adam first step moves by about lr under unit gradient") {
  // m_hat = v_hat = 1 after one step on g=1, so the update is lr/(1+eps).
  Parameter p{"p", Tensor({1}, {0.5}, true)};
  Adam opt({p}, 0.1);
  sum_all(p.value).backward();
  opt.step();
  CHECK(p.value.values()[0] == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("adam converges on a quadratic bowl") {
  Parameter p{"p", Tensor({1}, {0.0}, true)};
  Adam opt({p}, 0.1);
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    Tensor diff = sub(p.value, Tensor::scalar(3.0));
    sum_all(mul(diff, diff)).backward();
    opt.step();
  }
  CHECK(std::abs(p.value.values()[0] - 3.0) < 0.01);
}

TEST_CASE("init_uniform stays within the fan-in bound and is seeded") {
  std::mt19937_64 a(42), b(42);
  Tensor t1 = init_uniform(a, {16, 16}, 16);
  Tensor t2 = init_uniform(b, {16, 16}, 16);
  CHECK(t1.values() == t2.values());
  const double bound = std::sqrt(1.0 / 16.0);
  for (double v : t1.values()) CHECK(std::abs(v) <= bound);
}
