// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gmdn/rng.hpp"

namespace gmdn {

// Simple undirected graph with optional per-node feature vectors.
// Edges are stored as (u, v) with u < v; no self-loops, no duplicates.
struct Graph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<double>> features;  // empty, or one row per node

  void validate() const;  // throws std::invalid_argument on broken invariants
  int feature_width() const { return features.empty() ? 0 : static_cast<int>(features[0].size()); }
};

// Sorted adjacency lists, symmetric by construction.
struct NeighborIndex {
  std::vector<std::vector<int>> neighbors;

  explicit NeighborIndex(const Graph& g);
  int degree(int v) const { return static_cast<int>(neighbors[v].size()); }
};

// Barabasi-Albert graph: complete seed on m nodes, then each new node
// attaches m edges by preferential attachment without replacement.
Graph generate_ba(int n, int m, std::uint64_t seed);

// Erdos-Renyi G(n,p): each unordered pair included independently with prob p.
Graph generate_er(int n, double p, std::uint64_t seed);

// Two-community planted-partition graph: intra-block pairs with prob p_in,
// inter-block pairs with prob p_out.
Graph generate_two_block(int block_size, double p_in, double p_out, std::uint64_t seed);

// Relabel nodes: node i becomes perm[i]; features move with their nodes.
Graph permute(const Graph& g, const std::vector<int>& perm);

}  // namespace gmdn
