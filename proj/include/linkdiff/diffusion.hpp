//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linkdiff/autodiff.hpp"
#include "linkdiff/egnn.hpp"
#include "linkdiff/point_cloud.hpp"
#include "linkdiff/schedule.hpp"

namespace linkdiff {

enum class FrameMode { kAnchorCentroid, kContextCentroid };

const char *to_string(FrameMode mode) noexcept;
FrameMode frame_mode_from_string(const std::string &name);

struct DiffusionConfig {
  std::vector<std::string> vocab{ "C", "N", "O", "F" };
  double lift_scale = 1.0;
  FrameMode frame = FrameMode::kContextCentroid;
  // Whether the context centroid averages over pocket atoms as well.
  bool frame_includes_pocket = true;
  bool pocket_flag = false;
  int T = 500;
  double s = 1e-5;
  int nf = 128;
  int layers = 6;
  EdgeMode edge_mode = EdgeMode::kFullyConnected;
  double cutoff = 4.0;

  EgnnConfig egnn_config() const;
  void validate() const;
};

int vocab_index(const std::vector<std::string> &vocab, const std::string &sym);

// One-hot rows over vocab, multiplied by scale.
DenseMatrix lift_types(const std::vector<std::string> &types,
                       const std::vector<std::string> &vocab, double scale);

// Row-wise argmax; ties go to the lowest vocabulary index.
std::vector<std::string> decode_types(const DenseMatrix &feats,
                                      const std::vector<std::string> &vocab);

// Centroid of the anchors, or of the whole context (fragments, and pocket
// atoms if include_pocket).
Vec3d frame_origin(const PointCloud &u, FrameMode mode, bool include_pocket);

class DiffusionModel {
public:
  DiffusionModel(const DiffusionConfig &cfg, std::uint64_t seed);

  const DiffusionConfig &config() const { return cfg_; }
  const Schedule &schedule() const { return sched_; }
  EgnnModel &egnn() { return egnn_; }
  const EgnnModel &egnn() const { return egnn_; }

  // Context with lifted type features and coordinates relative to origin.
  PointCloud prepare_context(const PointCloud &u, const Vec3d &origin) const;

  Vec3d frame_origin(const PointCloud &u) const;

private:
  DiffusionConfig cfg_;
  Schedule sched_;
  EgnnModel egnn_;
};

struct TrainExample {
  std::string id;
  PointCloud context;  // fragments (+ pocket), with elements and flags
  Coords3d linker_coords;
  std::vector<std::string> linker_types;
};

// Splits a full molecule record into context and ground-truth linker.
TrainExample make_train_example(const PointCloud &molecule, std::string id);

struct NoiseDraw {
  int t = 0;
  Coords3d eps_r;
  DenseMatrix eps_h;
};

NoiseDraw draw_training_noise(int n_linker, int vocab_size, int T,
                              CounterRng &rng);

// Mean over atoms and channels of (eps - eps_hat)^2.
double noise_mse(const Coords3d &eps_r, const DenseMatrix &eps_h,
                 const Coords3d &eps_r_hat, const DenseMatrix &eps_h_hat);

struct LossResult {
  double loss = 0;
  Gradients grads;  // empty unless requested
  std::vector<double> per_example;
};

// Batch loss for explicit noise draws. The batch is one merged graph, so
// batch-norm statistics pool over all of its nodes.
LossResult diffusion_loss(DiffusionModel &model,
                          const std::vector<TrainExample> &batch,
                          const std::vector<NoiseDraw> &draws, Mode mode,
                          bool with_grads);

// Draws (t, eps) per example from `seed`, evaluates the loss in train mode,
// folds batch statistics into the running stats and returns the gradients.
LossResult training_step(DiffusionModel &model,
                         const std::vector<TrainExample> &batch,
                         std::uint64_t seed);

// Supplies Gaussian noise for the reverse chain. Step 0 is the prior draw
// z_T; step t >= 1 the fresh noise of the transition t -> t-1.
class NoiseSource {
public:
  virtual ~NoiseSource() = default;
  virtual void draw(int step, Coords3d &coords, DenseMatrix &feats) = 0;
};

class CounterNoise final: public NoiseSource {
public:
  explicit CounterNoise(std::uint64_t seed): seed_(seed) { }
  void draw(int step, Coords3d &coords, DenseMatrix &feats) override;

private:
  std::uint64_t seed_;
};

// Applies a fixed orthogonal map to every coordinate noise vector of inner.
class RotatedNoise final: public NoiseSource {
public:
  RotatedNoise(NoiseSource &inner, const Mat3d &rot)
      : inner_(&inner), rot_(rot) { }
  void draw(int step, Coords3d &coords, DenseMatrix &feats) override;

private:
  NoiseSource *inner_;
  Mat3d rot_;
};

struct SampleRecord {
  std::string input_id;
  std::uint64_t seed = 0;
  std::string size_source;
  int n_linker = 0;
  // Fragment atoms of the input (unchanged) followed by the linker atoms.
  PointCloud molecule;
};

SampleRecord sample_linker(const DiffusionModel &model, const PointCloud &u,
                           int n_linker, NoiseSource &noise);

SampleRecord sample_linker(const DiffusionModel &model, const PointCloud &u,
                           int n_linker, std::uint64_t seed);

struct DecodedLinker {
  Coords3d coords;
  DenseMatrix features;
  std::vector<std::string> types;
};

// x_hat = z_0 / alpha_0 - (sigma_0 / alpha_0) eps_hat(z_0, u, 0), then argmax
// over the type channels. u must already be prepared (centered, lifted).
DecodedLinker decode_final(const PointCloud &z0, const PointCloud &u_prepared,
                           const DiffusionModel &model);

struct TranslationGain {
  double lambda = 0;        // mean of diff / shift over shifted axes
  double max_abs_diff = 0;  // largest |mu(z + s, u + s) - mu(z, u)|
};

// Measures how the reverse-step mean responds to a joint translation of the
// uncentered inputs. z_t must carry type features; u is prepared internally.
TranslationGain translation_lambda_check(const DiffusionModel &model, int t,
                                         const PointCloud &z_t,
                                         const PointCloud &u,
                                         const Vec3d &shift);

struct TrainOptions {
  int epochs = 1;
  int batch_size = 16;
  AdamOptions adam;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0;
};

using EpochCallback = std::function<void(const EpochStats &)>;

std::vector<EpochStats> train_diffusion(DiffusionModel &model,
                                        const std::vector<TrainExample> &data,
                                        const TrainOptions &opts,
                                        std::uint64_t seed,
                                        const EpochCallback &on_epoch = {});

}  // namespace linkdiff
