#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "spdnet/ops.hpp"
#include "spdnet/stdm.hpp"
#include "test_util.hpp"

using namespace spdnet;
using testutil::random_tensor;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.seq_len = 32;
  cfg.pred_len = 4;
  cfg.channels = 2;
  cfg.trend_kernel = 9;
  cfg.seasonal_kernel = 3;
  cfg.seed = 5;
  return cfg;
}

// Centered moving average with zero padding at the edges, straight-line.
std::vector<double> oracle_moving_average(const std::vector<double>& x, std::size_t kernel) {
  const std::size_t n = x.size();
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kernel / 2);
  std::vector<double> out(n, 0.0);
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t j = -half; j <= half; ++j) {
      const std::ptrdiff_t t = i + j;
      if (t >= 0 && t < static_cast<std::ptrdiff_t>(n)) acc += x[t];
    }
    out[i] = acc / static_cast<double>(kernel);
  }
  return out;
}

void set_values(Parameter& p, const std::vector<double>& v) { p.value.values() = v; }

}  // namespace

TEST_CASE("constructor validates kernel sizes") {
  std::mt19937_64 rng(1);
  ModelConfig cfg = tiny_config();
  cfg.trend_kernel = 8;
  CHECK_THROWS_AS(StdmModule(cfg, rng), std::invalid_argument);
  cfg = tiny_config();
  cfg.seasonal_kernel = 11;  // larger than trend
  CHECK_THROWS_AS(StdmModule(cfg, rng), std::invalid_argument);
  cfg = tiny_config();
  cfg.trend_kernel = 33;  // >= seq_len
  CHECK_THROWS_AS(StdmModule(cfg, rng), std::invalid_argument);
}

TEST_CASE("averaging initialization maps a constant to pure trend") {
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(cfg.seed);
  StdmModule stdm(cfg, rng);
  Tensor x = Tensor::full({2, cfg.seq_len, cfg.channels}, 3.5);
  StdmModule::Components parts = stdm.decompose(x);
  // uniform averaging of a constant over 'same' padding keeps interior
  // values; edges see zero padding, so restrict to the interior.
  const std::size_t guard = cfg.trend_kernel;  // comfortably past both kernels
  for (std::size_t t = guard; t + guard < cfg.seq_len; ++t) {
    for (std::size_t c = 0; c < cfg.channels; ++c) {
      CHECK(parts.trend.at({0, t, c}) == doctest::Approx(3.5).epsilon(1e-12));
      CHECK(parts.seasonal.at({0, t, c}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
      CHECK(parts.residual.at({0, t, c}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("components always sum back to the input") {
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(cfg.seed);
  StdmModule stdm(cfg, rng);
  std::mt19937_64 data_rng(77);
  for (int round = 0; round < 20; ++round) {
    Tensor x = random_tensor(data_rng, {3, cfg.seq_len, cfg.channels}, false, -5.0, 5.0);
    // randomize the learnable kernels too
    std::vector<Parameter> params;
    stdm.collect_parameters(params);
    for (Parameter& p : params) {
      if (p.name.find("conv") != std::string::npos) {
        Tensor r = random_tensor(data_rng, p.value.shape(), false, -2.0, 2.0);
        set_values(p, r.values());
      }
    }
    StdmModule::Components parts = stdm.decompose(x);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double sum = parts.trend.values()[i] + parts.seasonal.values()[i] +
                         parts.residual.values()[i];
      CHECK(std::abs(sum - x.values()[i]) < 1e-9);
    }
  }
}

TEST_CASE("trend of a ramp matches the moving-average oracle in the interior") {
  ModelConfig cfg = tiny_config();
  cfg.channels = 1;
  std::mt19937_64 rng(cfg.seed);
  StdmModule stdm(cfg, rng);
  std::vector<double> ramp(cfg.seq_len);
  for (std::size_t t = 0; t < cfg.seq_len; ++t) ramp[t] = 0.5 * static_cast<double>(t) - 3.0;
  Tensor x({1, cfg.seq_len, 1}, ramp);
  StdmModule::Components parts = stdm.decompose(x);
  const std::vector<double> expect = oracle_moving_average(ramp, cfg.trend_kernel);
  const std::size_t half = cfg.trend_kernel / 2;
  for (std::size_t t = half; t + half < cfg.seq_len; ++t) {
    CHECK(parts.trend.at({0, t, 0}) == doctest::Approx(expect[t]).epsilon(1e-10));
    // interior moving average of a ramp reproduces the ramp
    CHECK(parts.trend.at({0, t, 0}) == doctest::Approx(ramp[t]).epsilon(1e-10));
  }
}

TEST_CASE("projection initialized to copy-last repeats the final step") {
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(cfg.seed);
  StdmModule stdm(cfg, rng);
  std::vector<Parameter> params;
  stdm.collect_parameters(params);
  for (Parameter& p : params) {
    if (p.name == "stdm.proj.weight") {
      std::vector<double> w(cfg.seq_len * cfg.pred_len, 0.0);
      for (std::size_t j = 0; j < cfg.pred_len; ++j) w[(cfg.seq_len - 1) * cfg.pred_len + j] = 1.0;
      set_values(p, w);
    }
  }
  std::mt19937_64 data_rng(5);
  Tensor x = random_tensor(data_rng, {2, cfg.seq_len, cfg.channels});
  Tensor out = stdm.forward(x);
  REQUIRE(out.shape() == std::vector<std::size_t>{2, cfg.pred_len, cfg.channels});
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t j = 0; j < cfg.pred_len; ++j) {
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        CHECK(out.at({b, j, c}) == doctest::Approx(x.at({b, cfg.seq_len - 1, c})).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("zero input produces zero output at initialization") {
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(cfg.seed);
  StdmModule stdm(cfg, rng);
  Tensor out = stdm.forward(Tensor::zeros({1, cfg.seq_len, cfg.channels}));
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("forward equals a direct projection of the raw input") {
  // The recombination is the identity, so the module must match applying the
  // projection matrix to x directly.
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(cfg.seed);
  StdmModule stdm(cfg, rng);
  std::vector<Parameter> params;
  stdm.collect_parameters(params);
  std::mt19937_64 data_rng(6);
  for (Parameter& p : params) {  // random weights everywhere
    Tensor r = random_tensor(data_rng, p.value.shape(), false, -1.0, 1.0);
    set_values(p, r.values());
  }
  const Parameter* weight = nullptr;
  const Parameter* bias = nullptr;
  for (const Parameter& p : params) {
    if (p.name == "stdm.proj.weight") weight = &p;
    if (p.name == "stdm.proj.bias") bias = &p;
  }
  REQUIRE(weight != nullptr);

  Tensor x = random_tensor(data_rng, {2, cfg.seq_len, cfg.channels});
  Tensor out = stdm.forward(x);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t j = 0; j < cfg.pred_len; ++j) {
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        double expect = bias->value.values()[j];
        for (std::size_t s = 0; s < cfg.seq_len; ++s) {
          expect += x.at({b, s, c}) * weight->value.values()[s * cfg.pred_len + j];
        }
        CHECK(out.at({b, j, c}) == doctest::Approx(expect).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("projection weights receive gradient under mse loss") {
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(cfg.seed);
  StdmModule stdm(cfg, rng);
  std::mt19937_64 data_rng(7);
  Tensor x = random_tensor(data_rng, {2, cfg.seq_len, cfg.channels});
  Tensor target = random_tensor(data_rng, {2, cfg.pred_len, cfg.channels});
  Tensor diff = sub(stdm.forward(x), target);
  mean_all(mul(diff, diff)).backward();

  std::vector<Parameter> params;
  stdm.collect_parameters(params);
  for (const Parameter& p : params) {
    if (p.name != "stdm.proj.weight") continue;
    REQUIRE(p.value.has_grad());
    double norm = 0.0;
    for (double g : p.value.grad()) norm += std::abs(g);
    CHECK(norm > 1e-6);
  }
}

TEST_CASE("input shape must match the built dimensions") {
  ModelConfig cfg = tiny_config();
  std::mt19937_64 rng(cfg.seed);
  StdmModule stdm(cfg, rng);
  CHECK_THROWS_AS(stdm.forward(Tensor::zeros({1, cfg.seq_len + 1, cfg.channels})),
                  std::invalid_argument);
  CHECK_THROWS_AS(stdm.forward(Tensor::zeros({1, cfg.seq_len, cfg.channels + 1})),
                  std::invalid_argument);
}
