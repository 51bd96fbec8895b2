//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "linkdiff/egnn.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "linkdiff/error.hpp"

namespace linkdiff {

const char *to_string(EdgeMode mode) noexcept {
  switch (mode) {
  case EdgeMode::kFullyConnected:
    return "fully_connected";
  case EdgeMode::kPocketCutoff:
    return "pocket_cutoff";
  case EdgeMode::kGlobalCutoff:
    return "global_cutoff";
  }
  return "unknown";
}

EdgeMode edge_mode_from_string(const std::string &name) {
  if (name == "fully_connected")
    return EdgeMode::kFullyConnected;
  if (name == "pocket_cutoff")
    return EdgeMode::kPocketCutoff;
  if (name == "global_cutoff")
    return EdgeMode::kGlobalCutoff;
  throw Error(ErrorCode::kInvalidConfig, "unknown edge mode '" + name + "'");
}

void EgnnConfig::validate() const {
  if (nf < 1 || layers < 1)
    throw Error(ErrorCode::kInvalidConfig, "nf and L must be >= 1");
  if (!(cutoff > 0))
    throw Error(ErrorCode::kInvalidConfig, "cutoff must be positive");
  if (features.vocab_size < 1)
    throw Error(ErrorCode::kInvalidConfig, "empty atom vocabulary");
}

GraphBatch build_graph(const PointCloud &z_t, const PointCloud &u,
                       const EgnnConfig &cfg, double time_fraction) {
  const FeatureLayout &lay = cfg.features;
  const int n_lin = z_t.size(), n_ctx = u.size(), n = n_lin + n_ctx;
  if (n == 0)
    throw Error(ErrorCode::kEmptySelection, "graph without nodes");
  if (n_lin > 0 && z_t.features.cols() != lay.vocab_size)
    throw Error(ErrorCode::kShapeMismatch, "linker features must have "
                                               + std::to_string(lay.vocab_size)
                                               + " type channels");
  if (n_ctx > 0 && u.features.cols() != lay.vocab_size)
    throw Error(ErrorCode::kShapeMismatch, "context features must have "
                                               + std::to_string(lay.vocab_size)
                                               + " type channels");
  if (static_cast<int>(u.flags.size()) != n_ctx)
    throw Error(ErrorCode::kShapeMismatch, "context flags missing");

  GraphBatch g;
  g.coords.resize(n, 3);
  g.features = DenseMatrix::Zero(n, lay.in_dim());
  g.movable.assign(n, 0);
  std::vector<char> pocket(n, 0);

  for (int i = 0; i < n_lin; ++i) {
    g.coords.row(i) = z_t.coords.row(i);
    g.features.row(i).head(lay.vocab_size) = z_t.features.row(i);
    g.movable[i] = 1;
    g.linker_nodes.push_back(i);
  }
  for (int k = 0; k < n_ctx; ++k) {
    const int i = n_lin + k;
    const AtomFlags &f = u.flags[k];
    g.coords.row(i) = u.coords.row(k);
    g.features.row(i).head(lay.vocab_size) = u.features.row(k);
    g.features(i, lay.fragment_col()) = f.fragment ? 1.0 : 0.0;
    if (lay.anchor_flag)
      g.features(i, lay.anchor_col()) = f.anchor ? 1.0 : 0.0;
    if (lay.pocket_flag)
      g.features(i, lay.pocket_col()) = f.pocket ? 1.0 : 0.0;
    pocket[i] = f.pocket ? 1 : 0;
  }
  g.features.col(lay.time_col()).setConstant(time_fraction);

  const double cut2 = cfg.cutoff * cfg.cutoff;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j)
        continue;
      bool keep = true;
      if (cfg.edge_mode != EdgeMode::kFullyConnected) {
        const bool filtered = cfg.edge_mode == EdgeMode::kGlobalCutoff
                              || pocket[i] || pocket[j];
        if (filtered)
          keep = (g.coords.row(i) - g.coords.row(j)).squaredNorm() < cut2;
      }
      if (keep) {
        g.receivers.push_back(i);
        g.senders.push_back(j);
      }
    }
  }
  g.node_offsets = { 0, n };
  g.linker_offsets = { 0, n_lin };
  return g;
}

GraphBatch merge_graphs(const std::vector<GraphBatch> &graphs) {
  if (graphs.size() == 1)
    return graphs.front();

  int n = 0, cols = -1;
  for (const auto &g: graphs) {
    n += g.num_nodes();
    if (cols < 0)
      cols = static_cast<int>(g.features.cols());
    else if (cols != g.features.cols())
      throw Error(ErrorCode::kShapeMismatch, "graphs differ in feature width");
  }

  GraphBatch out;
  out.coords.resize(n, 3);
  out.features.resize(n, std::max(cols, 0));
  out.node_offsets.clear();
  out.linker_offsets.clear();
  int offset = 0;
  for (const auto &g: graphs) {
    for (int k = 0; k + 1 < static_cast<int>(g.node_offsets.size()); ++k) {
      out.node_offsets.push_back(offset + g.node_offsets[k]);
      out.linker_offsets.push_back(static_cast<int>(out.linker_nodes.size())
                                   + g.linker_offsets[k]);
    }
    out.coords.middleRows(offset, g.num_nodes()) = g.coords;
    out.features.middleRows(offset, g.num_nodes()) = g.features;
    out.movable.insert(out.movable.end(), g.movable.begin(), g.movable.end());
    for (int e = 0; e < g.num_edges(); ++e) {
      out.receivers.push_back(offset + g.receivers[e]);
      out.senders.push_back(offset + g.senders[e]);
    }
    for (int i: g.linker_nodes)
      out.linker_nodes.push_back(offset + i);
    offset += g.num_nodes();
  }
  out.node_offsets.push_back(offset);
  out.linker_offsets.push_back(static_cast<int>(out.linker_nodes.size()));
  return out;
}

EgnnModel::EgnnModel(const EgnnConfig &cfg, std::uint64_t seed): cfg_(cfg) {
  cfg_.validate();
  CounterRng rng(seed, 0x6567'6e6e);
  const int nf = cfg_.nf, in = cfg_.in_dim();

  encoder_ = make_linear(params_, "encoder", in, nf, rng);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "egcl" + std::to_string(l);
    const std::array<LayerSpec, 2> edge_spec{
      LayerSpec{ nf, false, Activation::kSilu },
      LayerSpec{ nf, false, Activation::kSilu },
    };
    const std::array<LayerSpec, 2> node_spec{
      LayerSpec{ nf, true, Activation::kSilu },
      LayerSpec{ nf, true, Activation::kNone },
    };
    const std::array<LayerSpec, 3> coord_spec{
      LayerSpec{ nf, false, Activation::kSilu },
      LayerSpec{ nf, false, Activation::kSilu },
      LayerSpec{ 1, false, Activation::kNone, true },
    };
    EgclLayer layer;
    layer.phi_e = make_mlp(params_, p + ".phi_e", 2 * nf + 1, edge_spec, rng);
    layer.phi_h = make_mlp(params_, p + ".phi_h", 2 * nf, node_spec, rng);
    layer.phi_r = make_mlp(params_, p + ".phi_r", 2 * nf + 1, coord_spec, rng);
    layers_.push_back(std::move(layer));
  }
  decoder_ = make_linear(params_, "decoder", nf, in, rng);
}

EgclResult egcl_forward(const GraphBatch &graph, const DenseMatrix &h,
                        const Coords3d &r, const EgclLayer &layer,
                        const ParamStore &store, Mode mode) {
  const int n = graph.num_nodes(), ne = graph.num_edges();
  const auto nf = h.cols();
  if (h.rows() != n || r.rows() != n
      || layer.phi_e.in_dim() != 2 * nf + 1)
    throw Error(ErrorCode::kShapeMismatch, "EGCL input shapes");

  EgclResult res;
  EgclTape &tape = res.tape;
  tape.h = h;
  tape.diff.resize(ne, 3);
  for (int e = 0; e < ne; ++e)
    tape.diff.row(e) = r.row(graph.receivers[e]) - r.row(graph.senders[e]);
  const Eigen::VectorXd d2 = tape.diff.rowwise().squaredNorm();
  tape.dist = d2.cwiseSqrt();

  DenseMatrix edge_in(ne, 2 * nf + 1);
  edge_in.leftCols(nf) = h(graph.receivers, Eigen::all);
  edge_in.middleCols(nf, nf) = h(graph.senders, Eigen::all);
  edge_in.col(2 * nf) = d2;

  MlpResult msg = mlp_forward(layer.phi_e, store, edge_in, mode);
  DenseMatrix agg = DenseMatrix::Zero(n, nf);
  for (int e = 0; e < ne; ++e)
    agg.row(graph.receivers[e]) += msg.y.row(e);

  DenseMatrix node_in(n, 2 * nf);
  node_in << h, agg;
  MlpResult upd = mlp_forward(layer.phi_h, store, node_in, mode);
  res.h = h + upd.y;

  MlpResult rad = mlp_forward(layer.phi_r, store, edge_in, mode);
  tape.radial = rad.y.col(0);
  res.r = r;
  for (int e = 0; e < ne; ++e) {
    const int i = graph.receivers[e];
    if (graph.movable[i])
      res.r.row(i) += tape.diff.row(e) * (tape.radial(e) / (tape.dist(e) + 1));
  }

  tape.phi_e = std::move(msg.tape);
  tape.phi_h = std::move(upd.tape);
  tape.phi_r = std::move(rad.tape);
  return res;
}

EgclGrad egcl_backward(const GraphBatch &graph, const EgclLayer &layer,
                       const ParamStore &store, EgclTape &tape,
                       const DenseMatrix &dh_next, const Coords3d &dr_next,
                       Gradients &grads) {
  const int ne = graph.num_edges();
  const auto nf = tape.h.cols();

  EgclGrad out;
  out.dh = dh_next;
  out.dr = dr_next;

  // h' = h + phi_h([h, agg])
  const DenseMatrix d_node_in =
      mlp_backward(layer.phi_h, store, tape.phi_h, dh_next, grads);
  out.dh += d_node_in.leftCols(nf);
  const DenseMatrix d_agg = d_node_in.rightCols(nf);
  DenseMatrix d_msg = d_agg(graph.receivers, Eigen::all);

  // r'_i = r_i + sum_j diff_ij * s_ij / (d_ij + 1), linker nodes only
  DenseMatrix d_radial = DenseMatrix::Zero(ne, 1);
  Coords3d d_diff = Coords3d::Zero(ne, 3);
  Eigen::VectorXd d_dist = Eigen::VectorXd::Zero(ne);
  for (int e = 0; e < ne; ++e) {
    const int i = graph.receivers[e];
    if (!graph.movable[i])
      continue;
    const double denom = tape.dist(e) + 1;
    const double s = tape.radial(e);
    const double g_coef = dr_next.row(i).dot(tape.diff.row(e));
    d_diff.row(e) = dr_next.row(i) * (s / denom);
    d_radial(e, 0) = g_coef / denom;
    d_dist(e) = -g_coef * s / (denom * denom);
  }

  DenseMatrix d_edge_in =
      mlp_backward(layer.phi_e, store, tape.phi_e, d_msg, grads);
  d_edge_in += mlp_backward(layer.phi_r, store, tape.phi_r, d_radial, grads);

  for (int e = 0; e < ne; ++e) {
    const int i = graph.receivers[e], j = graph.senders[e];
    out.dh.row(i) += d_edge_in.row(e).head(nf);
    out.dh.row(j) += d_edge_in.row(e).segment(nf, nf);
    Eigen::RowVector3d g = d_diff.row(e)
                           + 2.0 * d_edge_in(e, 2 * nf) * tape.diff.row(e);
    if (tape.dist(e) > 0)
      g += (d_dist(e) / tape.dist(e)) * tape.diff.row(e);
    out.dr.row(i) += g;
    out.dr.row(j) -= g;
  }
  return out;
}

EgnnOutput egnn_forward(const EgnnModel &model, const GraphBatch &graph,
                        Mode mode) {
  const EgnnConfig &cfg = model.config();
  if (graph.features.cols() != cfg.in_dim())
    throw Error(ErrorCode::kShapeMismatch, "node features do not match model");

  EgnnOutput out;
  out.tape.input_features = graph.features;
  DenseMatrix h = linear_forward(model.encoder(), model.params(),
                                 graph.features);
  Coords3d r = graph.coords;
  out.tape.layers.reserve(model.layers().size());
  for (const EgclLayer &layer: model.layers()) {
    EgclResult res = egcl_forward(graph, h, r, layer, model.params(), mode);
    h = std::move(res.h);
    r = std::move(res.r);
    out.tape.layers.push_back(std::move(res.tape));
  }
  const DenseMatrix decoded = linear_forward(model.decoder(), model.params(), h);
  out.tape.final_h = std::move(h);

  const int vocab = cfg.features.vocab_size;
  out.eps_h = decoded(graph.linker_nodes, Eigen::seqN(0, vocab));
  out.eps_r = r(graph.linker_nodes, Eigen::all)
              - graph.coords(graph.linker_nodes, Eigen::all);
  out.final_coords = std::move(r);
  return out;
}

void update_running_stats(EgnnModel &model, const EgnnTape &tape) {
  const auto &layers = model.layers();
  for (std::size_t l = 0; l < layers.size() && l < tape.layers.size(); ++l)
    update_running_stats(layers[l].phi_h, model.params(), tape.layers[l].phi_h);
}

void egnn_backward(const EgnnModel &model, const GraphBatch &graph,
                   EgnnTape &tape, const Coords3d &d_eps_r,
                   const DenseMatrix &d_eps_h, Gradients &grads) {
  const EgnnConfig &cfg = model.config();
  const auto n_lin = static_cast<Eigen::Index>(graph.linker_nodes.size());
  if (d_eps_r.rows() != n_lin || d_eps_h.rows() != n_lin
      || d_eps_h.cols() != cfg.features.vocab_size
      || tape.layers.size() != model.layers().size())
    throw Error(ErrorCode::kTapeMismatch, "EGNN gradient shapes");

  const int n = graph.num_nodes();
  DenseMatrix d_decoded = DenseMatrix::Zero(n, cfg.in_dim());
  Coords3d dr = Coords3d::Zero(n, 3);
  for (Eigen::Index k = 0; k < n_lin; ++k) {
    const int i = graph.linker_nodes[k];
    d_decoded.row(i).head(cfg.features.vocab_size) = d_eps_h.row(k);
    dr.row(i) = d_eps_r.row(k);
  }
  DenseMatrix dh = linear_backward(model.decoder(), model.params(),
                                   tape.final_h, d_decoded, grads);

  for (std::size_t l = model.layers().size(); l-- > 0;) {
    EgclGrad g = egcl_backward(graph, model.layers()[l], model.params(),
                               tape.layers[l], dh, dr, grads);
    dh = std::move(g.dh);
    dr = std::move(g.dr);
  }
  linear_backward(model.encoder(), model.params(), tape.input_features, dh,
                  grads);
}

NoisePrediction predict_noise(const PointCloud &z_t, const PointCloud &u,
                              int t, int T, const EgnnModel &model,
                              Mode mode) {
  if (T < 1 || t < 0 || t > T)
    throw Error(ErrorCode::kInvalidSchedule, "timestep outside [0, T]");
  const GraphBatch g = build_graph(z_t, u, model.config(),
                                   static_cast<double>(t) / T);
  EgnnOutput out = egnn_forward(model, g, mode);
  return { std::move(out.eps_r), std::move(out.eps_h) };
}

}  // namespace linkdiff
