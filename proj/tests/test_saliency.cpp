#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "lgg/errors.hpp"
#include "lgg/saliency.hpp"
#include "oracles.hpp"
#include "toy.hpp"

using namespace lgg;

namespace {

// A hand-built model whose class-1 logit is a plain sum over channel 0's
// samples: width-1 identity kernels, pass-through batch norm and fusion,
// unit local weights, no global layer, and a head that reads node 0 only.
struct Probe {
  MontageGraph montage;
  ModelConfig mc;
  ModelParams params;

  explicit Probe(std::int64_t len = 16) {
    montage.kind = GraphKind::Custom;
    montage.channels = {"a", "b", "c", "d"};
    for (int i = 0; i < 4; ++i) {
      montage.locals.push_back(LocalGraph{montage.channels[static_cast<std::size_t>(i)], {i}});
    }

    mc.sample_rate = 2.0;  // width round(0.5 * 2) = 1
    mc.input_len = len;
    mc.levels = 1;
    mc.t_kernels = 1;
    mc.pool_window = 1;
    mc.pool_stride = 1;
    mc.pool2_window = 1;
    mc.pool2_stride = 1;
    mc.skip_global = true;
    mc.dropout_rate = 0.0;
    mc.bn_eps = 0.0;

    params = init_params(mc, montage, 0);
    params.kernel_w[0] = Tensor({1, 1}, {1.0});
    params.kernel_b[0] = Tensor({1});
    params.fusion_w = Tensor({1}, {1.0});
    params.fusion_b = Tensor::scalar(0.0);
    params.w_local = Tensor::full({4, static_cast<std::int64_t>(len)}, 1.0);
    params.b_local = Tensor({4, 1});
    params.head_w = Tensor({2, 4 * len});
    for (std::int64_t j = 0; j < len; ++j) params.head_w.at({1, j}) = 1.0;  // node 0 features
    params.head_b = Tensor({2});
  }
};

}  // namespace

TEST_CASE("saliency of a single-channel read-out is supported on that channel") {
  Probe probe;
  std::mt19937_64 rng(70);
  Tensor x = oracle::random_tensor({4, 16}, rng, 0.5, 1.5);  // positive: relu transparent

  SaliencyMap map = saliency(probe.params, x, probe.montage, probe.mc);
  REQUIRE(map.scores.size() == 4);
  CHECK(map.scores[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(map.scores[1] == 0.0);
  CHECK(map.scores[2] == 0.0);
  CHECK(map.scores[3] == 0.0);
  CHECK(map.channels == std::vector<std::string>{"a", "b", "c", "d"});
}

TEST_CASE("all-zero head weights give an all-zero map, normalization skipped") {
  Probe probe;
  probe.params.head_w = Tensor({2, 64});
  std::mt19937_64 rng(71);
  Tensor x = oracle::random_tensor({4, 16}, rng);
  SaliencyMap map = saliency(probe.params, x, probe.montage, probe.mc);
  for (double s : map.scores) CHECK(s == 0.0);
  CHECK(map.note.find("skipped") != std::string::npos);
}

TEST_CASE("saliency gradients match input-side finite differences") {
  const ModelConfig mc = toy::config4();
  const MontageGraph montage = toy::montage4();
  ModelParams params = init_params(mc, montage, 72);
  std::mt19937_64 rng(73);
  toy::scatter_bn_stats(params, rng);
  Tensor x = oracle::random_tensor({4, 64}, rng);

  Tensor grad = saliency_input_gradient(params, x, montage, mc);
  REQUIRE(grad.shape() == x.shape());

  // fix the predicted class, then probe 20 random coordinates
  Rng eval_rng(0);
  Tensor logits0 = forward_logits(x, params, montage, mc, Mode::Eval, eval_rng);
  const int pred = logits0[1] > logits0[0] ? 1 : 0;

  for (int probe = 0; probe < 20; ++probe) {
    const std::int64_t i = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(x.size()));
    auto f = [&](const std::vector<double>& value) {
      Tensor xp = x;
      xp[i] = value[0];
      Rng r(0);
      Tensor logits = forward_logits(xp, params, montage, mc, Mode::Eval, r);
      return logits[pred];
    };
    CHECK(finite_diff_check(f, {x[i]}, {grad[i]}, 1e-5) < 1e-4);
  }
}

TEST_CASE("aggregate_saliency averages and renormalizes") {
  SaliencyMap a{{"c1", "c2"}, {1.0, 0.0}, ""};
  SaliencyMap b{{"c1", "c2"}, {0.0, 1.0}, ""};

  SaliencyMap solo = aggregate_saliency({a});
  CHECK(solo.scores == std::vector<double>{1.0, 0.0});

  SaliencyMap same = aggregate_saliency({a, a});
  CHECK(same.scores == std::vector<double>{1.0, 0.0});

  // per-channel mean is [0.5, 0.5], then renormalized to [1, 1]
  SaliencyMap mixed = aggregate_saliency({a, b});
  CHECK(mixed.scores[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mixed.scores[1] == doctest::Approx(1.0).epsilon(1e-15));

  SaliencyMap c{{"c1", "c2"}, {0.0, 0.5}, ""};
  SaliencyMap uneven = aggregate_saliency({a, c});  // mean [0.5, 0.25]
  CHECK(uneven.scores[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(uneven.scores[1] == doctest::Approx(0.5).epsilon(1e-15));

  SaliencyMap other{{"cX"}, {1.0}, ""};
  CHECK_THROWS_AS(aggregate_saliency({a, other}), DataError);
}

TEST_CASE("topomap export/import round-trip") {
  SaliencyMap map{{"Fp1", "Fp2", "F3"}, {1.0, 0.25, 1.0 / 3.0}, "test"};
  export_topomap(map, "topo_test.txt");

  // header exactly once, one row per channel
  std::ifstream f("topo_test.txt");
  std::string line;
  int headers = 0, rows = 0;
  while (std::getline(f, line)) {
    if (line == "channel,score") {
      ++headers;
    } else if (!line.empty()) {
      ++rows;
    }
  }
  CHECK(headers == 1);
  CHECK(rows == 3);

  SaliencyMap back = import_topomap("topo_test.txt");
  CHECK(back.channels == map.channels);
  REQUIRE(back.scores.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(back.scores[i] - map.scores[i]) < 1e-12);
  std::remove("topo_test.txt");
}
