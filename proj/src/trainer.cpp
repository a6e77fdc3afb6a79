// Apache License, Version 2.0, refer to LICENSE.txt
#include "gmdn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace gmdn {

void TrainConfig::validate() const {
  if (epochs <= 0 || chunk_records <= 0 || workers <= 0 || m_steps_per_e_step <= 0)
    throw std::invalid_argument("TrainConfig: counts must be positive");
  if (patience < 0 || patience > epochs)
    throw std::invalid_argument("TrainConfig: patience must be in [0, epochs]");
  if (lr < 0.0) throw std::invalid_argument("TrainConfig: negative learning rate");
}

namespace {

constexpr double kAscentSlack = 1e-8;

struct ChunkEval {
  double q = 0.0;   // Eq-9 style objective contribution, incl. prior normalizer
  double ll = 0.0;  // summed marginal log-likelihood
  Tensor resp;
  std::map<std::string, Tensor> grads;
};

Tensor responsibilities_from(const Tape& tape, const Forward& fwd) {
  const Tensor& lw = tape.val(fwd.log_weights);
  const Tensor& lp = tape.val(fwd.log_pmf);
  const int r = lw.rows(), c = lw.cols();
  Tensor resp = Tensor::zeros(r, c);
  for (int i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < c; ++j) mx = std::max(mx, lw.at(i, j) + lp.at(i, j));
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      resp.at(i, j) = std::exp(lw.at(i, j) + lp.at(i, j) - mx);
      z += resp.at(i, j);
    }
    if (!(z > 0.0)) throw std::runtime_error("e_step: all-zero responsibility row");
    for (int j = 0; j < c; ++j) resp.at(i, j) /= z;
  }
  return resp;
}

ChunkEval eval_chunk(const Model& model, const Batch& batch, const Tensor* fixed_resp,
                     bool want_grad) {
  Tape tape;
  Forward fwd = model_forward(tape, model, batch);
  ChunkEval ev;
  ev.resp = fixed_resp ? *fixed_resp : responsibilities_from(tape, fwd);
  ev.ll = tape.val(fwd.marginal_ll).v[0];

  NodeId joint = tape.add(fwd.log_weights, fwd.log_pmf);
  NodeId expected_cll = tape.sum_all(tape.mul(tape.constant(ev.resp), joint));
  NodeId objective = tape.add(expected_cll, dirichlet_term(tape, fwd.log_weights, model.cfg.alpha));
  ev.q = tape.val(objective).v[0] +
         batch.num_samples * dirichlet_log_normalizer({model.cfg.alpha});
  if (want_grad) {
    tape.backward(tape.affine(objective, -1.0, 0.0));  // ascent via descent on -objective
    ev.grads = collect_grads(tape, fwd);
  }
  return ev;
}

void reduce_grads(std::map<std::string, Tensor>& acc, const std::map<std::string, Tensor>& g) {
  for (const auto& [name, t] : g) {
    if (t.v.empty()) continue;
    auto [it, inserted] = acc.emplace(name, t);
    if (!inserted) {
      if (it->second.v.empty()) {
        it->second = t;
      } else {
        for (std::size_t i = 0; i < t.v.size(); ++i) it->second.v[i] += t.v[i];
      }
    }
  }
}

// Evaluates fn(i) for i in [0, n) on `workers` threads; results are collected
// by index so downstream reductions are order-deterministic.
template <typename Fn>
auto map_indexed(int n, int workers, Fn&& fn) {
  using R = decltype(fn(0));
  std::vector<R> results(n);
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(workers, n); ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace

Tensor e_step(const Model& model, const Batch& batch) {
  Tape tape;
  Forward fwd = model_forward(tape, model, batch);
  return responsibilities_from(tape, fwd);
}

double m_step(Model& model, const Batch& batch, const Tensor& responsibilities,
              const AdamConfig& adam, int steps) {
  for (int s = 0; s < steps; ++s) {
    ChunkEval ev = eval_chunk(model, batch, &responsibilities, true);
    if (!std::isfinite(ev.q))
      throw std::runtime_error("m_step: non-finite objective (q=" + std::to_string(ev.q) + ")");
    adam_step(model.params, ev.grads, adam);
  }
  return eval_chunk(model, batch, &responsibilities, false).q;
}

std::vector<Batch> chunk_records(const Dataset& d, const std::vector<std::size_t>& ids,
                                 int chunk_size) {
  std::vector<Batch> chunks;
  for (std::size_t lo = 0; lo < ids.size(); lo += chunk_size) {
    const std::size_t hi = std::min(ids.size(), lo + chunk_size);
    chunks.push_back(build_batch(d, {ids.begin() + lo, ids.begin() + hi}));
  }
  return chunks;
}

double evaluate_ll(const Model& model, const std::vector<Batch>& chunks, int workers) {
  auto lls = map_indexed(static_cast<int>(chunks.size()), workers, [&](int i) {
    Tape tape;
    Forward fwd = model_forward(tape, model, chunks[i]);
    return tape.val(fwd.marginal_ll).v[0];
  });
  double total = 0.0;
  long samples = 0;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    total += lls[i];
    samples += chunks[i].num_samples;
  }
  if (samples == 0) throw std::invalid_argument("evaluate_ll: empty split");
  return total / static_cast<double>(samples);
}

double evaluate_ll(const Model& model, const Dataset& d, Split split, int chunk_size,
                   int workers) {
  return evaluate_ll(model, chunk_records(d, d.record_ids(split), chunk_size), workers);
}

FitResult fit_batches(Model& model, const std::vector<Batch>& train_chunks,
                      const std::vector<Batch>& val_chunks, const TrainConfig& cfg) {
  cfg.validate();
  if (train_chunks.empty()) throw std::invalid_argument("fit: no training data");
  long train_samples = 0;
  for (const Batch& b : train_chunks) train_samples += b.num_samples;

  FitResult result;
  const int epochs = cfg.fixed_epochs.value_or(cfg.epochs);
  const bool early_stop = !cfg.fixed_epochs.has_value();
  ParamStore best = model.params;
  double best_val = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int wait = 0;
  int violations = 0;
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  const int num_chunks = static_cast<int>(train_chunks.size());

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    // E-step and first gradient M-step over the full batch
    auto evals = map_indexed(num_chunks, cfg.workers,
                             [&](int i) { return eval_chunk(model, train_chunks[i], nullptr, true); });
    EpochStats st;
    st.epoch = epoch;
    std::map<std::string, Tensor> grads;
    std::vector<Tensor> resps(num_chunks);
    for (int i = 0; i < num_chunks; ++i) {
      st.objective_before += evals[i].q;
      st.train_ll += evals[i].ll;
      resps[i] = std::move(evals[i].resp);
      reduce_grads(grads, evals[i].grads);
    }
    if (!std::isfinite(st.objective_before))
      throw std::runtime_error("fit: non-finite objective at epoch " + std::to_string(epoch));
    st.train_ll /= static_cast<double>(train_samples);
    adam_step(model.params, grads, adam);

    for (int extra = 1; extra < cfg.m_steps_per_e_step; ++extra) {
      auto more = map_indexed(num_chunks, cfg.workers, [&](int i) {
        return eval_chunk(model, train_chunks[i], &resps[i], true);
      });
      std::map<std::string, Tensor> g2;
      for (int i = 0; i < num_chunks; ++i) reduce_grads(g2, more[i].grads);
      adam_step(model.params, g2, adam);
    }

    // GEM check: same responsibilities, updated parameters
    auto post = map_indexed(num_chunks, cfg.workers, [&](int i) {
      return eval_chunk(model, train_chunks[i], &resps[i], false);
    });
    for (int i = 0; i < num_chunks; ++i) st.objective_after += post[i].q;
    st.violation = st.objective_after < st.objective_before - kAscentSlack;
    if (st.violation) ++violations;

    st.val_ll = val_chunks.empty() ? st.train_ll : evaluate_ll(model, val_chunks, cfg.workers);
    result.history.push_back(st);
    result.epochs_run = epoch;

    if (early_stop) {
      if (st.val_ll > best_val) {
        best_val = st.val_ll;
        best_epoch = epoch;
        best = model.params;
        wait = 0;
      } else {
        ++wait;
        if (wait > cfg.patience) break;
      }
    } else if (st.val_ll > best_val) {
      best_val = st.val_ll;
      best_epoch = epoch;
    }
  }

  if (early_stop && best_epoch >= 0) model.params = std::move(best);
  result.best_val_ll = best_val;
  result.best_epoch = best_epoch;
  result.violation_rate =
      result.epochs_run > 0 ? static_cast<double>(violations) / result.epochs_run : 0.0;
  return result;
}

FitResult fit(Model& model, const Dataset& data, const TrainConfig& cfg) {
  auto train_chunks = chunk_records(data, data.record_ids(Split::train), cfg.chunk_records);
  auto val_chunks = chunk_records(data, data.record_ids(Split::val), cfg.chunk_records);
  return fit_batches(model, train_chunks, val_chunks, cfg);
}

SelectionResult model_select(const std::vector<GridEntry>& grid, const Dataset& data) {
  if (grid.empty()) throw std::invalid_argument("model_select: empty grid");
  SelectionResult sel;
  std::vector<int> best_epochs(grid.size(), -1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Model m = Model::init(grid[i].model, grid[i].train.init_seed);
    FitResult r = fit(m, data, grid[i].train);
    sel.val_lls.push_back(r.best_val_ll);
    best_epochs[i] = r.best_epoch > 0 ? r.best_epoch : r.epochs_run;
    if (sel.best_index < 0 || r.best_val_ll > sel.best_val_ll) {
      sel.best_index = static_cast<int>(i);
      sel.best_val_ll = r.best_val_ll;
    }
  }

  // final retraining on train+val with the winning epoch budget
  const GridEntry& win = grid[sel.best_index];
  std::vector<std::size_t> trainval = data.record_ids(Split::train);
  for (std::size_t id : data.record_ids(Split::val)) trainval.push_back(id);
  std::sort(trainval.begin(), trainval.end());
  TrainConfig refit_cfg = win.train;
  refit_cfg.fixed_epochs = best_epochs[sel.best_index];
  Model refit = Model::init(win.model, win.train.init_seed);
  sel.refit_result = fit_batches(
      refit, chunk_records(data, trainval, refit_cfg.chunk_records), {}, refit_cfg);
  sel.test_ll = evaluate_ll(refit, data, Split::test, refit_cfg.chunk_records, refit_cfg.workers);
  sel.refit_model = std::move(refit);
  return sel;
}

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "epoch,objective_before,objective_after,train_ll,val_ll,violation\n";
  for (const EpochStats& st : history)
    out << st.epoch << ',' << st.objective_before << ',' << st.objective_after << ','
        << st.train_ll << ',' << st.val_ll << ',' << (st.violation ? 1 : 0) << '\n';
}

}  // namespace gmdn
