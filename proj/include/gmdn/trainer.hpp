// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gmdn/model.hpp"

namespace gmdn {

struct TrainConfig {
  int epochs = 600;
  int patience = 30;
  double lr = 1e-4;
  int m_steps_per_e_step = 1;
  int chunk_records = 512;  // full batch processed in chunks, grads reduced in order
  int workers = 1;
  std::uint64_t init_seed = 0;
  std::optional<int> fixed_epochs;  // disables early stopping (final retraining)

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double objective_before = 0.0;  // expected complete log-lik + prior, pre M-step
  double objective_after = 0.0;   // same responsibilities, post M-step
  double train_ll = 0.0;          // mean per-sample marginal log-lik
  double val_ll = 0.0;
  bool violation = false;  // objective decreased beyond slack
};

struct FitResult {
  std::vector<EpochStats> history;
  double best_val_ll = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
  double violation_rate = 0.0;
};

// Analytic E-step: responsibilities (B x C), rows normalized in log space.
Tensor e_step(const Model& model, const Batch& batch);

// One or more gradient-ascent steps on the expected complete log-likelihood
// plus the Dirichlet prior, with responsibilities frozen. Returns the
// objective value (including the prior normalizer) after the update.
double m_step(Model& model, const Batch& batch, const Tensor& responsibilities,
              const AdamConfig& adam, int steps);

// GEM loop over pre-chunked train batches with early stopping on validation
// log-likelihood; restores the best-validation snapshot into `model`.
FitResult fit_batches(Model& model, const std::vector<Batch>& train_chunks,
                      const std::vector<Batch>& val_chunks, const TrainConfig& cfg);

// Convenience wrapper that chunks the dataset splits.
FitResult fit(Model& model, const Dataset& data, const TrainConfig& cfg);

std::vector<Batch> chunk_records(const Dataset& d, const std::vector<std::size_t>& ids,
                                 int chunk_size);

// Mean per-sample marginal log-likelihood over the given chunks.
double evaluate_ll(const Model& model, const std::vector<Batch>& chunks, int workers = 1);
double evaluate_ll(const Model& model, const Dataset& d, Split split, int chunk_size = 512,
                   int workers = 1);

struct GridEntry {
  ModelConfig model;
  TrainConfig train;
};

struct SelectionResult {
  int best_index = -1;
  double best_val_ll = 0.0;
  std::vector<double> val_lls;  // per grid entry
  Model refit_model;            // retrained on train+val
  double test_ll = 0.0;
  FitResult refit_result;
};

// Grid search by validation log-likelihood (ties -> lowest index), final
// retraining on train+val with the winning run's epoch budget, one test pass.
SelectionResult model_select(const std::vector<GridEntry>& grid, const Dataset& data);

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace gmdn
