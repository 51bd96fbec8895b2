//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "linkdiff/diffusion.hpp"
#include "linkdiff/point_cloud.hpp"
#include "linkdiff/sizegnn.hpp"

namespace linkdiff {

// One record of the extended XYZ format:
//
//   <atom count>
//   id=<id> role=<role> [key=value ...]
//   <El> <x> <y> <z> <fragment> <anchor> <pocket> <linker>
//   ...
//
// Flags are 0/1 integers and coordinates are written with 6 decimals.
// Metadata values must not contain whitespace.
struct XyzRecord {
  PointCloud cloud;
  std::map<std::string, std::string> meta;

  const std::string &id() const;
};

// Throws ParseError with the 1-based line number on malformed input.
std::vector<XyzRecord> parse_extxyz(std::string_view text);
std::string write_extxyz(const std::vector<XyzRecord> &records);

std::string read_text_file(const std::string &path);  // IoError
void write_text_file(const std::string &path, std::string_view text);

std::vector<XyzRecord> read_extxyz_file(const std::string &path);
void write_extxyz_file(const std::string &path,
                       const std::vector<XyzRecord> &records);

struct DatasetManifest {
  std::vector<std::string> vocab{ "C", "N", "O", "F" };
  std::vector<int> size_classes;
  std::map<std::string, std::vector<std::string>> splits;
  FrameMode framing = FrameMode::kAnchorCentroid;
  bool pocket = false;

  std::string to_json() const;
  static DatasetManifest from_json(std::string_view text);

  // Every split id must name a record, and every linker size must be a
  // listed class. Throws InvalidConfig.
  void check(const std::vector<XyzRecord> &records) const;
};

// Full run configuration, stored as JSON:
//
//   {"schedule": {"T", "s"},
//    "model": {"nf", "L", "edge_mode", "cutoff"},
//    "framing", "frame_includes_pocket", "pocket_flag", "vocab",
//    "lift_scale",
//    "optimizer": {"lr", "beta1", "beta2", "eps", "weight_decay", "clip_norm"},
//    "training": {"epochs", "batch_size"},
//    "size_model": {"nf", "L", "epochs", "batch_size", "lr"},
//    "size_classes"}
//
// Missing keys keep their defaults.
struct RunConfig {
  DiffusionConfig diffusion;
  TrainOptions training;
  SizeModelConfig size_model;
  TrainOptions size_training;

  static RunConfig from_json(std::string_view text);
  std::string to_json() const;

  // FNV-1a over the fields that determine the diffusion network.
  std::string model_hash() const;
};

// Checkpoints are weights containers whose metadata holds the run config
// (as JSON) and its model hash.
void save_diffusion_checkpoint(const std::string &path,
                               const DiffusionModel &model,
                               const RunConfig &cfg);

struct LoadedDiffusion {
  RunConfig config;
  std::string hash;
  std::unique_ptr<DiffusionModel> model;
};

LoadedDiffusion load_diffusion_checkpoint(const std::string &path);

void save_size_checkpoint(const std::string &path, const SizeModel &model);

std::unique_ptr<SizeModel> load_size_checkpoint(const std::string &path);

}  // namespace linkdiff
