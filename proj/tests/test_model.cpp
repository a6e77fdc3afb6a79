// Apache License, Version 2.0, refer to LICENSE.txt
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numeric>

#include "gmdn/model.hpp"
#include "gmdn/sir.hpp"

using namespace gmdn;

namespace {

std::vector<std::uint8_t> mask_with(int n, std::initializer_list<int> infected) {
  std::vector<std::uint8_t> m(n, 0);
  for (int v : infected) m[v] = 1;
  return m;
}

Batch sir_batch(const Graph& g, const SirParams& p, const std::vector<std::uint8_t>& mask,
                double target) {
  Batch b;
  SimulationRecord rec;
  rec.beta = p.beta;
  rec.gamma = p.gamma;
  rec.initial_mask = mask;
  b.append(g, NeighborIndex(g), build_node_features(g, p, mask),
           record_summary(rec, g.num_nodes), g.num_nodes, target);
  return b;
}

ModelConfig small_config(ConvKind conv, int components, Family family = Family::binomial) {
  ModelConfig cfg;
  cfg.conv = conv;
  cfg.layers = 2;
  cfg.hidden = 16;
  cfg.components = components;
  cfg.family = family;
  return cfg;
}

std::vector<int> random_perm(int n, Rng& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.next_below(i)]);
  return perm;
}

}  // namespace

TEST_CASE("single isolated node under gin reduces to the mlp on (1+eps)x") {
  ModelConfig cfg = small_config(ConvKind::gin, 2);
  cfg.layers = 1;
  cfg.hidden = 4;
  Model m = Model::init(cfg, 3);
  m.params.value("enc.l0.eps").v[0] = 0.25;

  Graph g;
  g.num_nodes = 1;
  Batch b = sir_batch(g, SirParams{0.3, 0.6, 0.05}, mask_with(1, {0}), 1.0);
  Tape tape;
  Forward fwd = model_forward(tape, m, b);
  const Tensor& h = tape.val(fwd.node_states);

  // manual MLP((1+eps) * x)
  const Tensor& W1 = m.params.value("enc.l0.mlp1.W");
  const Tensor& b1 = m.params.value("enc.l0.mlp1.b");
  const Tensor& W2 = m.params.value("enc.l0.mlp2.W");
  const Tensor& b2 = m.params.value("enc.l0.mlp2.b");
  std::vector<double> x = {0.3, 0.6, 0.5, 1.0, 1.0};
  for (double& v : x) v *= 1.25;
  std::vector<double> a(4, 0.0);
  for (int j = 0; j < 4; ++j) {
    for (int k = 0; k < 5; ++k) a[j] += x[k] * W1.at(k, j);
    a[j] = std::max(0.0, a[j] + b1.v[j]);
  }
  for (int j = 0; j < 4; ++j) {
    double out = b2.v[j];
    for (int k = 0; k < 4; ++k) out += a[k] * W2.at(k, j);
    CHECK(h.at(0, j) == doctest::Approx(out).epsilon(1e-12));
  }
}

TEST_CASE("identical features on a cycle give identical node states") {
  Graph g;
  g.num_nodes = 6;
  for (int v = 0; v < 6; ++v) g.edges.emplace_back(std::min(v, (v + 1) % 6), std::max(v, (v + 1) % 6));
  Model m = Model::init(small_config(ConvKind::gin, 3), 5);
  Batch b = sir_batch(g, SirParams{0.4, 0.5, 0.05}, std::vector<std::uint8_t>(6, 0), 0.0);
  Tape tape;
  Forward fwd = model_forward(tape, m, b);
  const Tensor& h = tape.val(fwd.node_states);
  for (int v = 1; v < 6; ++v)
    for (int j = 0; j < h.cols(); ++j)
      CHECK(h.at(v, j) == doctest::Approx(h.at(0, j)).epsilon(1e-12));
}

TEST_CASE("graph-level outputs are permutation invariant, node states equivariant") {
  Rng rng(17);
  for (ConvKind conv : {ConvKind::gin, ConvKind::gcn}) {
    Model m = Model::init(small_config(conv, 3), 11);
    for (int trial = 0; trial < 10; ++trial) {
      Graph g = generate_er(12, 0.3, rng.next_u64());
      auto mask = mask_with(12, {2, 7});
      SirParams p{0.6, 0.4, 0.05};
      std::vector<int> perm = random_perm(12, rng);

      Graph pg = permute(g, perm);
      std::vector<std::uint8_t> pmask(12, 0);
      for (int v = 0; v < 12; ++v) pmask[perm[v]] = mask[v];

      Tape ta, tb;
      Forward fa = model_forward(ta, m, sir_batch(g, p, mask, 5.0));
      Forward fb = model_forward(tb, m, sir_batch(pg, p, pmask, 5.0));

      CHECK(std::abs(ta.val(fa.per_sample_ll).v[0] - tb.val(fb.per_sample_ll).v[0]) < 1e-9);
      for (int j = 0; j < 3; ++j)
        CHECK(std::abs(ta.val(fa.weights).at(0, j) - tb.val(fb.weights).at(0, j)) < 1e-12);
      const Tensor& ha = ta.val(fa.node_states);
      const Tensor& hb = tb.val(fb.node_states);
      for (int v = 0; v < 12; ++v)
        for (int j = 0; j < ha.cols(); ++j)
          CHECK(std::abs(ha.at(v, j) - hb.at(perm[v], j)) < 1e-9);
    }
  }
}

TEST_CASE("receptive field is bounded by the layer count") {
  // path 0-1-2-3-4: with L=2, changing node 4's features cannot reach node 0
  Graph g;
  g.num_nodes = 5;
  for (int v = 0; v < 4; ++v) g.edges.emplace_back(v, v + 1);
  ModelConfig cfg = small_config(ConvKind::gin, 2);
  Model m = Model::init(cfg, 23);

  auto states_with_mask = [&](std::vector<std::uint8_t> mask) {
    Batch b = sir_batch(g, SirParams{0.5, 0.5, 0.05}, mask, 1.0);
    Tape tape;
    Forward fwd = model_forward(tape, m, b);
    return tape.val(fwd.node_states);
  };
  // the infected flag is node 4's only distinguishing feature
  Tensor h_off = states_with_mask(mask_with(5, {}));
  Tensor h_on = states_with_mask(mask_with(5, {4}));
  for (int j = 0; j < h_off.cols(); ++j) {
    CHECK(h_on.at(0, j) == doctest::Approx(h_off.at(0, j)).epsilon(1e-12));  // distance 4 > 2
    CHECK(h_on.at(1, j) == doctest::Approx(h_off.at(1, j)).epsilon(1e-12));  // distance 3 > 2
  }
  double moved = 0.0;
  for (int j = 0; j < h_off.cols(); ++j) moved += std::abs(h_on.at(2, j) - h_off.at(2, j));
  CHECK(moved > 0.0);  // distance 2 is inside the field
}

TEST_CASE("mean readout is invariant to node duplication, sum readout doubles") {
  Graph g = generate_er(8, 0.4, 3);
  auto mask = mask_with(8, {1});
  // duplicate: two disjoint copies of g as one graph, mask copied
  Graph g2;
  g2.num_nodes = 16;
  for (auto [u, v] : g.edges) {
    g2.edges.emplace_back(u, v);
    g2.edges.emplace_back(u + 8, v + 8);
  }
  auto mask2 = mask_with(16, {1, 9});
  SirParams p{0.3, 0.5, 0.05};

  for (ReadoutKind readout : {ReadoutKind::sum, ReadoutKind::mean}) {
    ModelConfig cfg = small_config(ConvKind::gin, 2);
    cfg.readout = readout;
    Model m = Model::init(cfg, 7);
    // gate logits before softmax: compare the readout of the gating head
    Tape ta, tb;
    Forward fa = model_forward(ta, m, sir_batch(g, p, mask, 2.0));
    Forward fb = model_forward(tb, m, sir_batch(g2, p, mask2, 2.0));
    // weights come from softmax(logits); sum doubles logits, mean preserves them
    for (int j = 0; j < 2; ++j) {
      const double wa = ta.val(fa.weights).at(0, j);
      const double wb = tb.val(fb.weights).at(0, j);
      if (readout == ReadoutKind::mean) CHECK(wa == doctest::Approx(wb).epsilon(1e-9));
    }
    if (readout == ReadoutKind::mean) {
      // p heads too
      for (int j = 0; j < 2; ++j)
        CHECK(ta.val(fa.comp_p).at(0, j) == doctest::Approx(tb.val(fb.comp_p).at(0, j)).epsilon(1e-9));
    }
  }
}

TEST_CASE("one shared encoder feeds the gate and every sub-network") {
  Model m = Model::init(small_config(ConvKind::gin, 4), 9);
  int encoder_sets = 0, heads = 0;
  for (const auto& [name, e] : m.params.entries) {
    if (name.rfind("enc.", 0) == 0 && name.find(".eps") != std::string::npos) ++encoder_sets;
    if (name.rfind("gate.", 0) == 0 || name.rfind("head.", 0) == 0) ++heads;
  }
  CHECK(encoder_sets == m.cfg.layers);  // exactly one encoder stack
  CHECK(heads == 4);                    // gate.W/b + head.p.W/b, no per-component encoders
}

TEST_CASE("zero gate parameters give uniform mixing weights") {
  Model m = Model::init(small_config(ConvKind::gin, 5), 2);
  for (double& v : m.params.value("gate.W").v) v = 0.0;
  for (double& v : m.params.value("gate.b").v) v = 0.0;
  Graph g = generate_er(10, 0.3, 4);
  Tape tape;
  Forward fwd = model_forward(tape, m, sir_batch(g, SirParams{0.2, 0.5, 0.05},
                                                 mask_with(10, {0}), 3.0));
  for (int j = 0; j < 5; ++j)
    CHECK(tape.val(fwd.weights).at(0, j) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("weights rows always sum to 1 and emission params respect their floors") {
  Rng rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    Model m = Model::init(small_config(ConvKind::gin, 3, Family::gaussian), rng.next_u64());
    // inflate parameters to push the squashing functions toward their limits
    for (auto& [name, e] : m.params.entries)
      for (double& v : e.value.v) v *= 50.0;
    Graph g = generate_er(15, 0.3, rng.next_u64());
    Tape tape;
    Forward fwd = model_forward(tape, m, sir_batch(g, SirParams{0.9, 0.2, 0.05},
                                                   mask_with(15, {3}), 4.0));
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) sum += tape.val(fwd.weights).at(0, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    for (int j = 0; j < 3; ++j) CHECK(tape.val(fwd.comp_sigma).at(0, j) >= kSigmaFloor);
  }
  // binomial p stays strictly inside (0,1)
  Model m = Model::init(small_config(ConvKind::gin, 3), 77);
  for (auto& [name, e] : m.params.entries)
    for (double& v : e.value.v) v *= 100.0;
  Graph g = generate_er(15, 0.4, 6);
  Tape tape;
  Forward fwd = model_forward(tape, m, sir_batch(g, SirParams{0.8, 0.3, 0.05},
                                                 mask_with(15, {0}), 4.0));
  for (int j = 0; j < 3; ++j) {
    CHECK(tape.val(fwd.comp_p).at(0, j) >= kPFloor);
    CHECK(tape.val(fwd.comp_p).at(0, j) <= 1.0 - kPFloor + 1e-12);
  }
}

TEST_CASE("zero head parameters hit the documented neutral outputs") {
  ModelConfig cfg = small_config(ConvKind::gin, 3, Family::gaussian);
  Model m = Model::init(cfg, 5);
  for (const char* name : {"head.mu.W", "head.mu.b", "head.sigma.W", "head.sigma.b"})
    for (double& v : m.params.value(name).v) v = 0.0;
  Graph g = generate_er(8, 0.3, 2);
  Tape tape;
  Forward fwd = model_forward(tape, m, sir_batch(g, SirParams{0.5, 0.5, 0.05},
                                                 mask_with(8, {0}), 1.0));
  for (int j = 0; j < 3; ++j) {
    CHECK(tape.val(fwd.comp_p).at(0, j) == 0.0);  // mu
    CHECK(tape.val(fwd.comp_sigma).at(0, j) ==
          doctest::Approx(std::log(2.0) + kSigmaFloor).epsilon(1e-9));  // softplus(0) + floor
  }

  Model mb = Model::init(small_config(ConvKind::gin, 3), 5);
  for (const char* name : {"head.p.W", "head.p.b"})
    for (double& v : mb.params.value(name).v) v = 0.0;
  Tape tb;
  Forward fb = model_forward(tb, mb, sir_batch(g, SirParams{0.5, 0.5, 0.05},
                                               mask_with(8, {0}), 1.0));
  for (int j = 0; j < 3; ++j)
    CHECK(tb.val(fb.comp_p).at(0, j) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mixture log-likelihood closed cases and direct-summation oracle") {
  MixtureOutput one;
  one.family = Family::binomial;
  one.weights = {1.0};
  one.p = {0.5};
  one.trials = 2;
  CHECK(mixture_log_likelihood(one, 1.0) == doctest::Approx(std::log(0.5)).epsilon(1e-12));

  // two identical components collapse to one
  MixtureOutput two = one;
  two.weights = {0.5, 0.5};
  two.p = {0.5, 0.5};
  CHECK(mixture_log_likelihood(two, 1.0) ==
        doctest::Approx(mixture_log_likelihood(one, 1.0)).epsilon(1e-12));

  // w=(0.5,0.5), Binom(10,0.1) and Binom(10,0.9) at y=5 vs brute-force pmf sum
  MixtureOutput mix;
  mix.family = Family::binomial;
  mix.weights = {0.5, 0.5};
  mix.p = {0.1, 0.9};
  mix.trials = 10;
  auto pmf = [](int n, int y, double p) {
    double comb = std::exp(std::lgamma(n + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n - y + 1.0));
    return comb * std::pow(p, y) * std::pow(1.0 - p, n - y);
  };
  const double direct = 0.5 * pmf(10, 5, 0.1) + 0.5 * pmf(10, 5, 0.9);
  CHECK(mixture_log_likelihood(mix, 5.0) == doctest::Approx(std::log(direct)).epsilon(1e-12));

  CHECK_THROWS_AS(mixture_log_likelihood(mix, 11.0), std::invalid_argument);
  CHECK_THROWS_AS(mixture_log_likelihood(mix, -1.0), std::invalid_argument);
}

TEST_CASE("binomial pmf sums to 1 over the 0..n support") {
  for (double p : {0.05, 0.4, 0.93}) {
    double total = 0.0;
    for (int y = 0; y <= 100; ++y) total += std::exp(log_binomial_pmf(100, y, p));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("in-support likelihoods stay finite in the deep tails") {
  MixtureOutput m;
  m.family = Family::binomial;
  m.weights = {1.0};
  m.p = {1e-9};  // below p floor, gets clamped
  m.trials = 100;
  CHECK(std::isfinite(mixture_log_likelihood(m, 100.0)));
}

TEST_CASE("dirichlet prior closed cases") {
  DirichletPrior uniform{{1.0, 1.0}};
  // constant density: same value for very different weights
  CHECK(dirichlet_log_density({0.5, 0.5}, uniform) ==
        doctest::Approx(dirichlet_log_density({0.99, 0.01}, uniform)).epsilon(1e-12));

  DirichletPrior mild{{1.05, 1.05, 1.05}};
  const double at_uniform = dirichlet_log_density({1.0 / 3, 1.0 / 3, 1.0 / 3}, mild);
  const double at_corner = dirichlet_log_density({1.0 - 2e-12, 1e-12, 1e-12}, mild);
  CHECK(at_uniform > at_corner);  // alpha > 1 penalizes collapse

  DirichletPrior a22{{2.0, 2.0}};
  CHECK(dirichlet_log_density({0.5, 0.5}, a22) ==
        doctest::Approx(std::log(6.0) + 2.0 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("uniform alpha contributes zero gradient through the tape term") {
  Tape t;
  NodeId lw = t.param(Tensor::row({std::log(0.3), std::log(0.7)}));
  NodeId d = dirichlet_term(t, lw, {1.0, 1.0});
  CHECK(t.val(d).v[0] == 0.0);
  t.backward(d);
  for (double g : t.grad(lw).v) CHECK(g == 0.0);
}

TEST_CASE("forward per-sample ll agrees with the scalar mixture likelihood") {
  Model m = Model::init(small_config(ConvKind::gin, 4), 13);
  Graph g = generate_ba(14, 2, 5);
  Batch b = sir_batch(g, SirParams{0.7, 0.3, 0.05}, mask_with(14, {0, 6}), 9.0);
  Tape tape;
  Forward fwd = model_forward(tape, m, b);
  auto mixtures = extract_mixtures(tape, fwd, b, Family::binomial);
  REQUIRE(mixtures.size() == 1);
  CHECK(tape.val(fwd.per_sample_ll).v[0] ==
        doctest::Approx(mixture_log_likelihood(mixtures[0], 9.0)).epsilon(1e-9));
}

TEST_CASE("dense (structure-blind) encoder ignores topology") {
  ModelConfig cfg = small_config(ConvKind::dense, 3);
  Model m = Model::init(cfg, 21);
  SirParams p{0.5, 0.25, 0.05};
  Graph a = generate_er(10, 0.1, 1);  // sparse
  Graph b = generate_ba(10, 4, 2);    // dense, very different topology
  auto mask = mask_with(10, {2});
  Tape ta, tb;
  Forward fa = model_forward(ta, m, sir_batch(a, p, mask, 4.0));
  Forward fb = model_forward(tb, m, sir_batch(b, p, mask, 4.0));
  CHECK(ta.val(fa.per_sample_ll).v[0] == tb.val(fb.per_sample_ll).v[0]);
  for (int j = 0; j < 3; ++j)
    CHECK(ta.val(fa.weights).at(0, j) == tb.val(fb.weights).at(0, j));
}

TEST_CASE("checkpoint round-trip is exact") {
  Model m = Model::init(small_config(ConvKind::gcn, 3, Family::gaussian), 31);
  m.params.step = 42;
  m.params.value("gate.b").v[1] = 0.123456789012345;
  save_checkpoint(m, "ckpt_test.json");
  Model r = load_checkpoint("ckpt_test.json");
  CHECK(r.cfg.components == 3);
  CHECK(r.cfg.family == Family::gaussian);
  CHECK(r.cfg.conv == ConvKind::gcn);
  CHECK(r.params.step == 42);
  CHECK(r.params.checksum() == m.params.checksum());
  std::remove("ckpt_test.json");
  CHECK_THROWS_AS(load_checkpoint("ckpt_test.json"), std::runtime_error);
}

TEST_CASE("model config validation") {
  ModelConfig cfg = small_config(ConvKind::gin, 3);
  cfg.alpha = {1.0, 1.0};  // wrong length for C=3
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.alpha = {1.0, 1.0, -0.5};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.alpha.clear();
  cfg.layers = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
