// Apache License, Version 2.0, refer to LICENSE.txt
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "gmdn/graph.hpp"
#include "gmdn/rng.hpp"

using namespace gmdn;

TEST_CASE("rng is deterministic and splits into independent streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng parent(7);
  Rng s0 = parent.split(0);
  Rng s1 = parent.split(1);
  CHECK(s0.next_u64() != s1.next_u64());
  // splitting is a const operation on the parent
  CHECK(parent.split(0).next_u64() == Rng(7).split(0).next_u64());
}

TEST_CASE("rng uniform and next_below stay in range") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double x = rng.uniform(0.1, 1.0);
    CHECK(x >= 0.1);
    CHECK(x < 1.0);
    CHECK(rng.next_below(7) < 7);
  }
}

TEST_CASE("graph validate rejects broken invariants") {
  Graph g;
  g.num_nodes = 3;
  g.edges = {{0, 1}};
  CHECK_NOTHROW(g.validate());
  g.edges.push_back({1, 1});
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);  // self loop
  g.edges = {{0, 1}, {0, 1}};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);  // duplicate
  g.edges = {{0, 5}};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);  // out of range
  g.edges = {{0, 1}};
  g.features = {{1.0}, {2.0}, {3.0, 4.0}};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);  // ragged features
}

TEST_CASE("neighbor index is symmetric and sorted") {
  Graph g = generate_er(30, 0.2, 5);
  NeighborIndex nbr(g);
  for (int v = 0; v < g.num_nodes; ++v) {
    CHECK(std::is_sorted(nbr.neighbors[v].begin(), nbr.neighbors[v].end()));
    for (int u : nbr.neighbors[v]) {
      CHECK(u != v);
      const auto& back = nbr.neighbors[u];
      CHECK(std::binary_search(back.begin(), back.end(), v));
    }
  }
}

TEST_CASE("ba smallest instance: n=3, m=2 gives the forced edge count") {
  // complete seed on 2 nodes (1 edge) + one new node attaching 2 edges
  Graph g = generate_ba(3, 2, 1);
  g.validate();
  CHECK(g.num_nodes == 3);
  CHECK(g.edges.size() == 3);  // triangle
}

TEST_CASE("ba edge count is m(n-m) + C(m,2) exactly") {
  for (auto [n, m] : {std::pair{100, 5}, {50, 2}, {20, 10}}) {
    Graph g = generate_ba(n, m, 99);
    g.validate();
    CHECK(static_cast<int>(g.edges.size()) == m * (n - m) + m * (m - 1) / 2);
  }
}

TEST_CASE("ba is deterministic under a fixed seed") {
  Graph a = generate_ba(100, 5, 123);
  Graph b = generate_ba(100, 5, 123);
  CHECK(a.edges == b.edges);
  Graph c = generate_ba(100, 5, 124);
  CHECK(a.edges != c.edges);
}

TEST_CASE("ba mean degree approaches 2m") {
  double total_degree = 0.0;
  const int runs = 50, n = 200, m = 2;
  for (int s = 0; s < runs; ++s) total_degree += 2.0 * generate_ba(n, m, 1000 + s).edges.size();
  const double mean_degree = total_degree / (runs * n);
  CHECK(mean_degree == doctest::Approx(2.0 * m).epsilon(0.05));
}

TEST_CASE("ba rejects m outside [1, n)") {
  CHECK_THROWS_AS(generate_ba(5, 5, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_ba(5, 0, 0), std::invalid_argument);
}

TEST_CASE("er edge probability extremes") {
  CHECK(generate_er(10, 0.0, 1).edges.empty());
  CHECK(generate_er(10, 1.0, 1).edges.size() == 45);
  CHECK_THROWS_AS(generate_er(10, -0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_er(10, 1.1, 1), std::invalid_argument);
}

TEST_CASE("er edge count within 3 sigma of the binomial mean") {
  // n=100, p=0.1: mean 495, sigma ~21.1
  Graph g = generate_er(100, 0.1, 7);
  g.validate();
  CHECK(g.edges.size() > 495 - 3 * 21.1);
  CHECK(g.edges.size() < 495 + 3 * 21.1);
}

TEST_CASE("two-block generator splits communities as configured") {
  Graph g = generate_two_block(30, 0.3, 0.02, 11);
  g.validate();
  CHECK(g.num_nodes == 60);
  int intra = 0, inter = 0;
  for (auto [u, v] : g.edges) ((u < 30) == (v < 30) ? intra : inter)++;
  CHECK(intra > inter);  // 0.3 * 2*C(30,2) = 261 expected vs 0.02 * 900 = 18
  CHECK(intra > 180);
  CHECK(inter < 60);
}

TEST_CASE("permute relabels edges and moves features") {
  Graph g;
  g.num_nodes = 3;
  g.edges = {{0, 2}};
  g.features = {{1.0}, {2.0}, {3.0}};
  Graph p = permute(g, {1, 0, 2});  // swap 0 and 1
  CHECK(p.edges == std::vector<std::pair<int, int>>{{1, 2}});
  CHECK(p.features[1][0] == 1.0);
  CHECK(p.features[0][0] == 2.0);
}

TEST_CASE("permute by identity and inverse round-trips") {
  Graph g = generate_ba(20, 3, 4);
  std::vector<int> id(20);
  std::iota(id.begin(), id.end(), 0);
  CHECK(permute(g, id).edges == g.edges);

  Rng rng(9);
  std::vector<int> perm = id;
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.next_below(i)]);
  std::vector<int> inv(20);
  for (int i = 0; i < 20; ++i) inv[perm[i]] = i;
  Graph round = permute(permute(g, perm), inv);
  auto canon = [](Graph gr) {
    std::sort(gr.edges.begin(), gr.edges.end());
    return gr.edges;
  };
  CHECK(canon(round) == canon(g));
}

TEST_CASE("permute preserves the degree multiset") {
  Graph g = generate_er(25, 0.3, 2);
  Rng rng(5);
  std::vector<int> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.next_below(i)]);
  auto degrees = [](const Graph& gr) {
    NeighborIndex nbr(gr);
    std::vector<int> d;
    for (int v = 0; v < gr.num_nodes; ++v) d.push_back(nbr.degree(v));
    std::sort(d.begin(), d.end());
    return d;
  };
  CHECK(degrees(permute(g, perm)) == degrees(g));
  CHECK(permute(g, perm).edges.size() == g.edges.size());
}

TEST_CASE("permute rejects non-bijections") {
  Graph g = generate_er(4, 0.5, 1);
  CHECK_THROWS_AS(permute(g, {0, 1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(permute(g, {0, 1, 2, 2}), std::invalid_argument);
  CHECK_THROWS_AS(permute(g, {0, 1, 2, 4}), std::invalid_argument);
}
