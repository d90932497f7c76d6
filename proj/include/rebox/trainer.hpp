#pragma once

#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "rebox/errors.hpp"
#include "rebox/io.hpp"
#include "rebox/network.hpp"
#include "rebox/rng.hpp"

namespace rebox {

struct TrainConfig {
  double base_lr = 0.01;
  double epoch_decay = 0.90;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 64;
  int epochs = 36;
  std::uint64_t seed = 1;
  int log_every = 50;

  void validate() const {
    if (base_lr <= 0) throw ConfigError("base_lr must be positive");
    if (epoch_decay <= 0 || epoch_decay > 1) throw ConfigError("epoch_decay must be in (0,1]");
    if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0,1)");
    if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (log_every < 1) throw ConfigError("log_every must be >= 1");
  }
};

inline double lr_at(int epoch, const TrainConfig& cfg) {
  return cfg.base_lr * std::pow(cfg.epoch_decay, epoch);
}

/// Velocity-lookahead accelerated step. The weight-decay term joins the
/// gradient before the velocity update, so it is damped by momentum like any
/// other gradient component.
template <typename T>
void nesterov_step(std::vector<TensorT<T>>& params, const std::vector<TensorT<T>>& grads,
                   std::vector<TensorT<T>>& velocity, double lr, double momentum,
                   double weight_decay) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& gr = grads[i];
    auto& v = velocity[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const T g = gr[j] + T(weight_decay) * p[j];
      const T v_new = T(momentum) * v[j] - T(lr) * g;
      p[j] += T(momentum) * v_new - T(lr) * g;
      v[j] = v_new;
    }
  }
}

struct LossRecord {
  std::int64_t iteration = 0;
  int epoch = 0;
  double lr = 0;
  double loss = 0;
};

/// Fully materialized training set: every sample already warped to the network
/// input side.
template <typename T>
struct TrainSetT {
  TensorT<T> inputs;                         // (N, side, side, channels)
  std::vector<std::array<double, 2>> sizes;  // pre-warp (w, h) per sample
  TensorT<T> targets;                        // (N, 4)

  int count() const { return inputs.rank() ? inputs.extent(0) : 0; }
};
using TrainSet = TrainSetT<float>;

template <typename T>
RegressionBatchT<T> gather_batch(const TrainSetT<T>& set, const std::vector<int>& rows) {
  const int side = set.inputs.extent(1), ch = set.inputs.extent(3);
  RegressionBatchT<T> b;
  b.inputs = TensorT<T>({int(rows.size()), side, side, ch});
  b.targets = TensorT<T>({int(rows.size()), 4});
  b.sizes.resize(rows.size());
  const std::size_t row_elems = std::size_t(side) * side * ch;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    std::copy_n(set.inputs.data() + std::size_t(r) * row_elems, row_elems,
                b.inputs.data() + i * row_elems);
    for (int k = 0; k < 4; ++k) b.targets.at2(int(i), k) = set.targets.at2(r, k);
    b.sizes[i] = set.sizes[std::size_t(r)];
  }
  return b;
}

/// Mean loss over a set in test mode, evaluated in batches.
template <typename T>
double evaluate_loss(NetworkT<T>& net, const TrainSetT<T>& set, int batch_size) {
  double total = 0;
  const int n = set.count();
  for (int start = 0; start < n; start += batch_size) {
    std::vector<int> rows;
    for (int r = start; r < std::min(n, start + batch_size); ++r) rows.push_back(r);
    auto batch = gather_batch(set, rows);
    auto out = net.forward(batch.inputs, net.spec().use_size_input ? &batch.sizes : nullptr,
                           false, nullptr);
    total += mse_loss(out, batch.targets).value * double(rows.size());
  }
  return total / n;
}

struct TrainResult {
  std::vector<LossRecord> history;
  std::vector<double> val_loss;  // one entry per epoch when a validation set is given
  double final_loss = 0;
};

/// Shuffled mini-batch epochs with per-epoch learning-rate decay. Aborts with
/// DivergedError when the loss goes non-finite or above 1e6. Deterministic for
/// a fixed (network seed, config seed, dataset).
template <typename T>
TrainResult train(NetworkT<T>& net, const TrainSetT<T>& data, const TrainConfig& cfg,
                  const TrainSetT<T>* val = nullptr, std::FILE* progress = nullptr) {
  cfg.validate();
  if (data.count() == 0) throw Error("training set is empty");

  std::vector<TensorT<T>> velocity;
  for (const auto& p : net.params()) velocity.emplace_back(p.shape());

  Rng dropout_rng = derive_stream(cfg.seed, "trainer.dropout");
  TrainResult result;
  std::int64_t iteration = 0;
  std::vector<int> order(std::size_t(data.count()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    Rng shuffle_rng = derive_stream(cfg.seed, "trainer.shuffle", std::uint64_t(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[std::size_t(shuffle_rng.uniform_int(i))]);

    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
      std::vector<int> rows(order.begin() + std::ptrdiff_t(start),
                            order.begin() + std::ptrdiff_t(end));
      auto batch = gather_batch(data, rows);
      auto out = net.forward(batch.inputs,
                             net.spec().use_size_input ? &batch.sizes : nullptr, true,
                             &dropout_rng);
      auto loss = mse_loss(out, batch.targets);
      if (!std::isfinite(loss.value) || loss.value > 1e6)
        throw DivergedError("loss " + std::to_string(loss.value) + " at iteration " +
                            std::to_string(iteration));
      net.zero_grads();
      net.backward(loss.grad);
      nesterov_step(net.params(), net.grads(), velocity, lr, cfg.momentum, cfg.weight_decay);

      if (iteration % cfg.log_every == 0)
        result.history.push_back({iteration, epoch, lr, loss.value});
      result.final_loss = loss.value;
      ++iteration;
    }
    if (val) {
      result.val_loss.push_back(evaluate_loss(net, *val, cfg.batch_size));
      if (progress)
        std::fprintf(progress, "epoch %d lr %.6g train F %.6g val F %.6g\n", epoch, lr,
                     result.final_loss, result.val_loss.back());
    } else if (progress) {
      std::fprintf(progress, "epoch %d lr %.6g train F %.6g\n", epoch, lr, result.final_loss);
    }
    if (progress) std::fflush(progress);
  }
  return result;
}

inline void write_loss_csv(const std::string& path, const std::vector<LossRecord>& history) {
  std::string csv = "iteration,epoch,lr,loss\n";
  char line[128];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%lld,%d,%.17g,%.17g\n", (long long)r.iteration, r.epoch,
                  r.lr, r.loss);
    csv += line;
  }
  write_text_file(path, csv);
}

}  // namespace rebox
