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
#include "linkdiff/point_cloud.hpp"

namespace linkdiff {

enum class EdgeMode {
  kFullyConnected,
  // Edges touching a pocket atom only below the cutoff; all other pairs kept.
  kPocketCutoff,
  // Every edge only below the cutoff.
  kGlobalCutoff,
};

const char *to_string(EdgeMode mode) noexcept;
EdgeMode edge_mode_from_string(const std::string &name);

// Node feature row: [atom type channels | fragment | anchor? | pocket? | t/T].
struct FeatureLayout {
  int vocab_size = 4;
  bool anchor_flag = false;
  bool pocket_flag = false;

  int fragment_col() const { return vocab_size; }
  int anchor_col() const { return anchor_flag ? vocab_size + 1 : -1; }
  int pocket_col() const {
    return pocket_flag ? vocab_size + 1 + int(anchor_flag) : -1;
  }
  int time_col() const { return in_dim() - 1; }
  int in_dim() const {
    return vocab_size + 2 + int(anchor_flag) + int(pocket_flag);
  }
};

struct EgnnConfig {
  int nf = 128;
  int layers = 6;
  FeatureLayout features;
  EdgeMode edge_mode = EdgeMode::kFullyConnected;
  double cutoff = 4.0;

  int in_dim() const { return features.in_dim(); }
  void validate() const;
};

// Joint graph over one or more (linker, context) pairs. Within each pair the
// linker nodes come first. Edge e carries the message from node senders[e]
// to node receivers[e].
struct GraphBatch {
  Coords3d coords;
  DenseMatrix features;
  std::vector<char> movable;
  std::vector<int> receivers, senders;
  std::vector<int> linker_nodes;
  std::vector<int> node_offsets{ 0 };
  std::vector<int> linker_offsets{ 0 };

  int num_nodes() const { return static_cast<int>(coords.rows()); }
  int num_edges() const { return static_cast<int>(receivers.size()); }
  int num_graphs() const { return static_cast<int>(node_offsets.size()) - 1; }
};

// z_t features must be the lifted type channels (width vocab_size); context
// features likewise. Edges are chosen from the input coordinates.
GraphBatch build_graph(const PointCloud &z_t, const PointCloud &u,
                       const EgnnConfig &cfg, double time_fraction = 0.0);

GraphBatch merge_graphs(const std::vector<GraphBatch> &graphs);

struct EgclLayer {
  Mlp phi_e, phi_h, phi_r;
};

class EgnnModel {
public:
  EgnnModel() = default;
  EgnnModel(const EgnnConfig &cfg, std::uint64_t seed);

  const EgnnConfig &config() const { return cfg_; }
  ParamStore &params() { return params_; }
  const ParamStore &params() const { return params_; }
  const Linear &encoder() const { return encoder_; }
  const Linear &decoder() const { return decoder_; }
  const std::vector<EgclLayer> &layers() const { return layers_; }

private:
  EgnnConfig cfg_;
  ParamStore params_;
  Linear encoder_, decoder_;
  std::vector<EgclLayer> layers_;
};

struct EgclTape {
  DenseMatrix h;
  Coords3d diff;
  Eigen::VectorXd dist;
  Eigen::VectorXd radial;
  MlpTape phi_e, phi_h, phi_r;
};

struct EgclResult {
  DenseMatrix h;
  Coords3d r;
  EgclTape tape;
};

EgclResult egcl_forward(const GraphBatch &graph, const DenseMatrix &h,
                        const Coords3d &r, const EgclLayer &layer,
                        const ParamStore &store, Mode mode);

struct EgclGrad {
  DenseMatrix dh;
  Coords3d dr;
};

EgclGrad egcl_backward(const GraphBatch &graph, const EgclLayer &layer,
                       const ParamStore &store, EgclTape &tape,
                       const DenseMatrix &dh_next, const Coords3d &dr_next,
                       Gradients &grads);

struct EgnnTape {
  DenseMatrix input_features;
  DenseMatrix final_h;
  std::vector<EgclTape> layers;
};

// Rows follow graph.linker_nodes.
struct EgnnOutput {
  Coords3d eps_r;
  DenseMatrix eps_h;
  Coords3d final_coords;  // all nodes
  EgnnTape tape;
};

EgnnOutput egnn_forward(const EgnnModel &model, const GraphBatch &graph,
                        Mode mode);

void update_running_stats(EgnnModel &model, const EgnnTape &tape);

void egnn_backward(const EgnnModel &model, const GraphBatch &graph,
                   EgnnTape &tape, const Coords3d &d_eps_r,
                   const DenseMatrix &d_eps_h, Gradients &grads);

struct NoisePrediction {
  Coords3d eps_r;
  DenseMatrix eps_h;
};

// Predicted noise for the linker z_t given context u at step t of T.
NoisePrediction predict_noise(const PointCloud &z_t, const PointCloud &u,
                              int t, int T, const EgnnModel &model,
                              Mode mode = Mode::kEval);

}  // namespace linkdiff
