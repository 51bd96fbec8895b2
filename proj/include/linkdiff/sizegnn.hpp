//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linkdiff/autodiff.hpp"
#include "linkdiff/diffusion.hpp"
#include "linkdiff/egnn.hpp"
#include "linkdiff/point_cloud.hpp"

namespace linkdiff {

struct SizeModelConfig {
  int nf = 256;
  int layers = 5;
  std::vector<std::string> vocab{ "C", "N", "O", "F" };
  std::vector<int> size_classes;  // strictly increasing

  int in_dim() const { return static_cast<int>(vocab.size()); }
  int out_dim() const { return static_cast<int>(size_classes.size()); }
  void validate() const;
  int class_index(int size) const;  // throws UnknownSizeClass
};

struct GclLayer {
  Mlp phi_e, phi_h;
};

// Fully connected graph classifier over fragment atoms: one-hot types as
// node features, squared distances on the edges, mean-pooled logits.
class SizeModel {
public:
  SizeModel(const SizeModelConfig &cfg, std::uint64_t seed);

  const SizeModelConfig &config() const { return cfg_; }
  ParamStore &params() { return params_; }
  const ParamStore &params() const { return params_; }
  const Linear &encoder() const { return encoder_; }
  const Linear &head() const { return head_; }
  const std::vector<GclLayer> &layers() const { return layers_; }

  // Zeroes the output head, making every prediction uniform.
  void zero_head();

private:
  SizeModelConfig cfg_;
  ParamStore params_;
  Linear encoder_, head_;
  std::vector<GclLayer> layers_;
};

// (graphs x out) logits for a batch of fragment clouds.
DenseMatrix size_logits(const SizeModel &model,
                        const std::vector<PointCloud> &fragments,
                        Mode mode = Mode::kEval);

Eigen::VectorXd predict_size_distribution(const PointCloud &fragments,
                                          const SizeModel &model);

// Draws size_classes[k] with probability dist[k]. Throws InvalidDistribution
// unless dist is non-negative and sums to one within 1e-6.
int sample_size(const Eigen::VectorXd &dist,
                const std::vector<int> &size_classes, std::uint64_t seed);

struct SizeExample {
  PointCloud fragments;
  int size = 0;
};

struct SizeLoss {
  double loss = 0;
  Gradients grads;
};

// Mean cross-entropy over the batch.
SizeLoss size_loss(SizeModel &model, const std::vector<SizeExample> &batch,
                   Mode mode, bool with_grads);

std::vector<EpochStats> train_size_model(SizeModel &model,
                                         const std::vector<SizeExample> &data,
                                         const TrainOptions &opts,
                                         std::uint64_t seed,
                                         const EpochCallback &on_epoch = {});

double size_accuracy(const SizeModel &model,
                     const std::vector<SizeExample> &data);

}  // namespace linkdiff
