// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gmdn/graph.hpp"
#include "gmdn/tensor.hpp"

namespace gmdn {

struct SirParams {
  double beta = 0.0;       // per-step, per-edge infection probability
  double gamma = 0.1;      // per-step recovery probability
  double init_prob = 0.05; // independent initial infection probability

  void validate() const;  // beta in [0,1], gamma in [0.1,1], init_prob in (0,1)
};

struct SimulationRecord {
  int graph_id = 0;
  double beta = 0.0;
  double gamma = 0.0;
  std::vector<std::uint8_t> initial_mask;  // length n
  int target = 0;                          // |ever infected| at absorption
};

enum class Split { train = 0, val = 1, test = 2 };

struct Dataset {
  std::string family;  // "BA" or "ER"
  int n = 0;
  std::vector<double> connectivities;
  int graphs_per_conn = 0;
  int sims_per_config = 0;
  std::uint64_t seed = 0;
  std::vector<Graph> graphs;
  std::vector<Split> graph_split;  // per graph
  std::vector<SimulationRecord> records;

  Split record_split(std::size_t rec) const { return graph_split[records[rec].graph_id]; }
  std::vector<std::size_t> record_ids(Split s) const;
};

// Synchronous discrete-time SIR run to absorption. Per step, every node
// infectious at the start infects each susceptible neighbour with prob beta,
// then recovers with prob gamma; new infections become infectious next step.
// Caps at 10*n steps (throws if hit). If step_counts is given, the (|S|,|I|,
// |R|) triple after every step is appended to it.
SimulationRecord simulate_sir_masked(const Graph& g, const NeighborIndex& nbr,
                                     const SirParams& params,
                                     std::vector<std::uint8_t> initial_mask, Rng rng,
                                     std::vector<std::array<int, 3>>* step_counts = nullptr);

// Draws the initial mask (each node with prob init_prob, resampled if empty).
SimulationRecord simulate_sir(const Graph& g, const SirParams& params, std::uint64_t seed);

// Per-node 5-vector [beta, gamma, beta/gamma, 1, infected]
Tensor build_node_features(const Graph& g, const SirParams& params,
                           const std::vector<std::uint8_t>& initial_mask);

// Record-level summary for structure-blind models:
// [beta, gamma, beta/gamma, 1, fraction initially infected]
std::vector<double> record_summary(const SimulationRecord& rec, int n);

// Full dataset synthesis: for each connectivity, graphs_per_conn graphs; for
// each graph and each init prob in {1%, 5%, 10%}, sims_per_config records.
// Record i owns the RNG stream split(seed, i), so results are independent of
// worker count.
Dataset generate_dataset(const std::string& family, int n,
                         const std::vector<double>& connectivities, int graphs_per_conn,
                         int sims_per_config, std::uint64_t seed, int workers = 1);

void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace gmdn
