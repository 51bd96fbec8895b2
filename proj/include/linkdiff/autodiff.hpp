//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "linkdiff/random.hpp"

namespace linkdiff {

using DenseMatrix = Eigen::MatrixXd;

enum class Activation { kNone, kSilu };
enum class Mode { kTrain, kEval };

inline double silu(double x) {
  return x / (1.0 + std::exp(-x));
}

inline double silu_grad(double x) {
  const double sig = 1.0 / (1.0 + std::exp(-x));
  return sig * (1.0 + x * (1.0 - sig));
}

template <class Derived>
DenseMatrix silu(const Eigen::MatrixBase<Derived> &x) {
  return x.unaryExpr([](double v) { return silu(v); });
}

template <class Derived>
DenseMatrix silu_grad(const Eigen::MatrixBase<Derived> &x) {
  return x.unaryExpr([](double v) { return silu_grad(v); });
}

// Named, ordered collection of dense tensors. Non-trainable entries hold
// layer state (batch-norm running statistics).
class ParamStore {
public:
  int add(std::string name, DenseMatrix value, bool trainable = true);

  int size() const { return static_cast<int>(entries_.size()); }
  DenseMatrix &value(int i) { return entries_[i].value; }
  const DenseMatrix &value(int i) const { return entries_[i].value; }
  const std::string &name(int i) const { return entries_[i].name; }
  bool trainable(int i) const { return entries_[i].trainable; }

  // -1 if absent.
  int find(std::string_view name) const;

  std::int64_t num_trainable() const;

private:
  struct Entry {
    std::string name;
    DenseMatrix value;
    bool trainable;
  };
  std::vector<Entry> entries_;
};

// Gradients indexed like the entries of a ParamStore.
using Gradients = std::vector<DenseMatrix>;

Gradients zero_gradients(const ParamStore &store);

// Row-batched affine map y = x W + b (W: in x out, b: 1 x out).
struct Linear {
  int weight = -1;
  int bias = -1;
  int in_dim = 0;
  int out_dim = 0;
};

// Weights uniform in +-sqrt(1/in), bias zero; all zero if zero_init.
Linear make_linear(ParamStore &store, const std::string &name, int in_dim,
                   int out_dim, CounterRng &rng, bool zero_init = false);

DenseMatrix linear_forward(const Linear &layer, const ParamStore &store,
                           const DenseMatrix &x);

// Accumulates dW, db into grads and returns dL/dx.
DenseMatrix linear_backward(const Linear &layer, const ParamStore &store,
                            const DenseMatrix &x, const DenseMatrix &dy,
                            Gradients &grads);

// Normalization over the row (node) axis.
struct BatchNorm {
  int gamma = -1;
  int beta = -1;
  int running_mean = -1;
  int running_var = -1;
  double momentum = 0.1;
  double eps = 1e-5;
};

struct DenseLayer {
  Linear linear;
  std::optional<BatchNorm> norm;
  Activation act = Activation::kNone;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  int in_dim() const { return layers.front().linear.in_dim; }
  int out_dim() const { return layers.back().linear.out_dim; }
};

struct LayerSpec {
  int out_dim;
  bool batch_norm = false;
  Activation act = Activation::kNone;
  bool zero_init = false;
};

Mlp make_mlp(ParamStore &store, const std::string &prefix, int in_dim,
             std::span<const LayerSpec> specs, CounterRng &rng);

// Primal values recorded by mlp_forward for one backward pass.
struct MlpTape {
  struct Record {
    DenseMatrix input;
    DenseMatrix normalized;   // x_hat of the norm layer (train mode)
    Eigen::RowVectorXd inv_std;
    Eigen::RowVectorXd batch_mean;
    Eigen::RowVectorXd batch_var;
    DenseMatrix pre_activation;
  };

  const Mlp *owner = nullptr;
  Mode mode = Mode::kEval;
  std::vector<Record> records;
  Eigen::Index out_rows = 0;
  bool consumed = false;
};

struct MlpResult {
  DenseMatrix y;
  MlpTape tape;
};

// Train mode normalizes with batch statistics (recorded in the tape; see
// update_running_stats), eval mode with the running statistics.
MlpResult mlp_forward(const Mlp &mlp, const ParamStore &store,
                      const DenseMatrix &x, Mode mode);

// Folds the batch statistics of a train-mode tape into the running stats.
void update_running_stats(const Mlp &mlp, ParamStore &store,
                          const MlpTape &tape);

// Consumes the tape. Throws TapeMismatch if the tape was already used, was
// produced by another network, or does not match dy.
DenseMatrix mlp_backward(const Mlp &mlp, const ParamStore &store,
                         MlpTape &tape, const DenseMatrix &dy,
                         Gradients &grads);

struct AdamOptions {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-13;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

class Adam {
public:
  Adam(const ParamStore &store, AdamOptions opts);

  void step(ParamStore &store, const Gradients &grads);

  const AdamOptions &options() const { return opts_; }
  std::int64_t steps_taken() const { return t_; }

private:
  AdamOptions opts_;
  std::vector<DenseMatrix> m_, v_;
  std::int64_t t_ = 0;
};

double gradient_norm(const ParamStore &store, const Gradients &grads);

// Versioned binary container; see README for the layout.
void save_weights(const std::string &path, const ParamStore &store,
                  const std::string &metadata);

struct LoadedWeights {
  std::string metadata;
  std::vector<std::string> names;
  std::vector<DenseMatrix> values;
};

LoadedWeights load_weights(const std::string &path);

// Copies tensors by name; throws ShapeMismatch on any missing or misshapen
// entry.
void assign_weights(ParamStore &store, const LoadedWeights &weights);

}  // namespace linkdiff
