//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "linkdiff/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "linkdiff/chem.hpp"
#include "linkdiff/diffusion.hpp"
#include "linkdiff/error.hpp"
#include "linkdiff/io.hpp"
#include "linkdiff/random.hpp"
#include "linkdiff/sizegnn.hpp"
#include "linkdiff/toy.hpp"

namespace linkdiff {

namespace {
  namespace fs = std::filesystem;

  std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
  }

  std::uint64_t sample_seed(std::uint64_t seed, std::size_t input, int k) {
    return splitmix64(seed
                      ^ splitmix64((static_cast<std::uint64_t>(input) << 20)
                                   + static_cast<std::uint64_t>(k)));
  }

  // ---- train -------------------------------------------------------------

  struct TrainArgs {
    std::string config, data, out;
    std::uint64_t seed = 0;
  };

  int run_train(const TrainArgs &a, std::ostream &out) {
    RunConfig cfg = RunConfig::from_json(read_text_file(a.config));
    const fs::path data(a.data);
    const DatasetManifest manifest = DatasetManifest::from_json(
        read_text_file((data / "manifest.json").string()));
    const auto records = read_extxyz_file((data / "train.xyz").string());
    if (records.empty())
      throw Error(ErrorCode::kInvalidConfig, "no training records");
    if (cfg.diffusion.vocab != manifest.vocab)
      throw Error(ErrorCode::kInvalidConfig,
                  "config vocab differs from the dataset manifest");
    if (cfg.size_model.size_classes.empty())
      cfg.size_model.size_classes = manifest.size_classes;
    cfg.size_model.vocab = cfg.diffusion.vocab;

    std::vector<TrainExample> examples;
    std::vector<SizeExample> size_examples;
    for (const auto &r: records) {
      examples.push_back(make_train_example(r.cloud, r.id()));
      size_examples.push_back({ r.cloud.fragments(), r.cloud.linker().size() });
    }

    fs::create_directories(a.out);
    const fs::path outdir(a.out);
    std::ostringstream log;
    auto report = [&](const char *what) {
      return [&, what](const EpochStats &st) {
        log << what << " epoch=" << st.epoch << " loss=" << fmt6(st.mean_loss)
            << '\n';
        out << what << " epoch=" << st.epoch << " loss=" << fmt6(st.mean_loss)
            << std::endl;
      };
    };

    DiffusionModel model(cfg.diffusion, a.seed);
    train_diffusion(model, examples, cfg.training, a.seed,
                    report("diffusion"));
    save_diffusion_checkpoint((outdir / "diffusion.ldw").string(), model, cfg);

    SizeModel size_model(cfg.size_model, splitmix64(a.seed));
    train_size_model(size_model, size_examples, cfg.size_training,
                     splitmix64(a.seed), report("size"));
    save_size_checkpoint((outdir / "size.ldw").string(), size_model);

    write_text_file((outdir / "config.json").string(), cfg.to_json());
    write_text_file((outdir / "train_log.txt").string(), log.str());
    out << "config_hash=" << cfg.model_hash() << '\n';
    return kExitOk;
  }

  // ---- sample ------------------------------------------------------------

  struct SampleArgs {
    std::string checkpoint, input, size_checkpoint, out, config;
    std::string linker_size;
    int n_samples = 1;
    std::uint64_t seed = 0;
    bool force = false;
  };

  int run_sample(const SampleArgs &a, std::ostream &out, std::ostream &err) {
    LoadedDiffusion loaded = load_diffusion_checkpoint(a.checkpoint);
    if (!a.config.empty()) {
      const RunConfig cfg = RunConfig::from_json(read_text_file(a.config));
      if (cfg.model_hash() != loaded.hash) {
        if (!a.force) {
          err << "error: config hash " << cfg.model_hash()
              << " does not match checkpoint hash " << loaded.hash
              << " (use --force to override)\n";
          return kExitFailure;
        }
        err << "warning: config hash mismatch ignored\n";
      }
    }

    std::optional<int> fixed_size;
    const bool predict = a.linker_size == "predict";
    if (!predict && !a.linker_size.empty()) {
      try {
        std::size_t used = 0;
        fixed_size = std::stoi(a.linker_size, &used);
        if (used != a.linker_size.size() || *fixed_size < 1)
          throw std::invalid_argument("size");
      } catch (const std::exception &) {
        throw Error(ErrorCode::kInvalidConfig,
                    "--linker-size must be a positive integer or 'predict'");
      }
    }
    std::unique_ptr<SizeModel> size_model;
    if (predict) {
      if (a.size_checkpoint.empty())
        throw Error(ErrorCode::kInvalidConfig,
                    "--linker-size predict requires --size-checkpoint");
      size_model = load_size_checkpoint(a.size_checkpoint);
    }

    const auto inputs = read_extxyz_file(a.input);
    std::vector<XyzRecord> samples;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const XyzRecord &in = inputs[i];
      const PointCloud u = in.cloud.context();
      for (int k = 0; k < a.n_samples; ++k) {
        const std::uint64_t seed = sample_seed(a.seed, i, k);
        int n = 0;
        std::string source;
        if (predict) {
          const Eigen::VectorXd dist =
              predict_size_distribution(u.fragments(), *size_model);
          n = sample_size(dist, size_model->config().size_classes,
                          splitmix64(seed));
          source = "predict";
        } else if (fixed_size) {
          n = *fixed_size;
          source = "given";
        } else {
          n = in.cloud.linker().size();
          source = "true";
          if (n == 0)
            throw Error(ErrorCode::kEmptyLinker,
                        "input " + in.id()
                            + " has no linker atoms; pass --linker-size");
        }
        SampleRecord s = sample_linker(*loaded.model, u, n, seed);
        XyzRecord rec;
        rec.cloud = std::move(s.molecule);
        rec.meta["id"] = in.id() + "_s" + std::to_string(k);
        rec.meta["role"] = "sample";
        rec.meta["input"] = in.id();
        rec.meta["seed"] = std::to_string(seed);
        rec.meta["size_source"] = source;
        rec.meta["n_linker"] = std::to_string(n);
        samples.push_back(std::move(rec));
      }
    }
    write_extxyz_file(a.out, samples);
    out << "wrote " << samples.size() << " samples to " << a.out << '\n';
    return kExitOk;
  }

  // ---- predict-size ------------------------------------------------------

  int run_predict_size(const std::string &checkpoint, const std::string &input,
                       std::ostream &out) {
    const auto model = load_size_checkpoint(checkpoint);
    const auto &classes = model->config().size_classes;
    for (const auto &rec: read_extxyz_file(input)) {
      const Eigen::VectorXd p =
          predict_size_distribution(rec.cloud.fragments(), *model);
      out << "input id=" << rec.id();
      for (std::size_t k = 0; k < classes.size(); ++k)
        out << " p" << classes[k] << '=' << fmt6(p(static_cast<int>(k)));
      out << '\n';
    }
    return kExitOk;
  }

  // ---- evaluate ----------------------------------------------------------

  struct EvaluateArgs {
    std::string samples, references, train_linkers, pockets, report;
  };

  int run_evaluate(const EvaluateArgs &a, std::ostream &out) {
    const ElementTable &table = ElementTable::builtin();
    std::map<std::string, PointCloud> pockets;
    if (!a.pockets.empty())
      for (const auto &rec: read_extxyz_file(a.pockets)) {
        PointCloud p = rec.cloud.pocket();
        pockets[rec.id()] = p.empty() ? rec.cloud : p;
      }

    std::vector<EvalInput> inputs;
    for (const auto &rec: read_extxyz_file(a.references)) {
      EvalInput in;
      in.id = rec.id();
      in.fragments = rec.cloud.fragments();
      in.reference = rec.cloud.subset(
          rec.cloud.select([](const AtomFlags &f) { return !f.pocket; }));
      auto it = pockets.find(in.id);
      if (it != pockets.end())
        in.pocket = it->second;
      else if (!rec.cloud.pocket().empty())
        in.pocket = rec.cloud.pocket();
      inputs.push_back(std::move(in));
    }

    std::vector<EvalSample> samples;
    for (auto &rec: read_extxyz_file(a.samples)) {
      auto it = rec.meta.find("input");
      samples.push_back({ it == rec.meta.end() ? rec.id() : it->second,
                          std::move(rec.cloud) });
    }

    std::set<std::string> train_keys;
    for (const auto &rec: read_extxyz_file(a.train_linkers))
      train_keys.insert(linker_key(rec.cloud, table));

    const MetricsReport report =
        evaluate_samples(samples, inputs, train_keys, table);
    const std::string text = format_report(report);
    write_text_file(a.report, text);
    out << text.substr(text.rfind("summary"));
    return kExitOk;
  }

  // ---- gen-toy -----------------------------------------------------------

  struct GenToyArgs {
    int n = 1000;
    std::uint64_t seed = 0;
    std::string out;
    int max_fragments = 2;
    bool pocket = false;
  };

  int run_gen_toy(const GenToyArgs &a, std::ostream &out) {
    ToyConfig cfg;
    cfg.max_fragments = a.max_fragments;
    cfg.pocket = a.pocket;
    const ToyDataset ds = generate_toy_dataset(a.n, a.seed, cfg);
    write_toy_dataset(a.out, ds);
    out << "wrote " << ds.train.size() << " train and " << ds.test.size()
        << " test records to " << a.out << '\n';
    return kExitOk;
  }
}  // namespace

int cli_main(const std::vector<std::string> &args, std::ostream &out,
             std::ostream &err) {
  CLI::App app{ "Equivariant diffusion model for molecular linker design",
                args.empty() ? "linkdiff" : args.front() };
  app.require_subcommand(1);

  TrainArgs train;
  auto *train_cmd = app.add_subcommand("train", "Train diffusion and size models");
  train_cmd->add_option("--config", train.config, "Run config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd
      ->add_option("--data", train.data,
                   "Dataset directory with train.xyz and manifest.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--seed", train.seed, "Random seed");

  SampleArgs sample;
  auto *sample_cmd = app.add_subcommand("sample", "Generate linkers");
  sample_cmd->add_option("--checkpoint", sample.checkpoint)
      ->required()
      ->check(CLI::ExistingFile);
  sample_cmd->add_option("--input", sample.input, "Input records (extxyz)")
      ->required()
      ->check(CLI::ExistingFile);
  sample_cmd->add_option("--n-samples", sample.n_samples)
      ->check(CLI::PositiveNumber);
  sample_cmd->add_option("--linker-size", sample.linker_size,
                         "Integer size or 'predict'; default: size of the "
                         "input linker");
  sample_cmd->add_option("--size-checkpoint", sample.size_checkpoint)
      ->check(CLI::ExistingFile);
  sample_cmd->add_option("--seed", sample.seed);
  sample_cmd->add_option("--out", sample.out, "Output samples (extxyz)")
      ->required();
  sample_cmd->add_option("--config", sample.config,
                         "Refuse to run unless this config matches the "
                         "checkpoint")
      ->check(CLI::ExistingFile);
  sample_cmd->add_flag("--force", sample.force, "Ignore a config mismatch");

  std::string ps_checkpoint, ps_input;
  auto *ps_cmd = app.add_subcommand("predict-size",
                                    "Print linker size distributions");
  ps_cmd->add_option("--checkpoint", ps_checkpoint)
      ->required()
      ->check(CLI::ExistingFile);
  ps_cmd->add_option("--input", ps_input)->required()->check(CLI::ExistingFile);

  EvaluateArgs eval;
  auto *eval_cmd = app.add_subcommand("evaluate", "Score samples");
  eval_cmd->add_option("--samples", eval.samples)
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--references", eval.references)
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--train-linkers", eval.train_linkers)
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--pockets", eval.pockets)->check(CLI::ExistingFile);
  eval_cmd->add_option("--report", eval.report)->required();

  GenToyArgs toy;
  auto *toy_cmd = app.add_subcommand("gen-toy", "Generate a toy dataset");
  toy_cmd->add_option("--n", toy.n)->check(CLI::PositiveNumber);
  toy_cmd->add_option("--seed", toy.seed);
  toy_cmd->add_option("--out", toy.out)->required();
  toy_cmd->add_option("--max-fragments", toy.max_fragments)
      ->check(CLI::Range(2, 4));
  toy_cmd->add_flag("--pocket", toy.pocket, "Surround complexes with a pocket");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty())
      rev.pop_back();
    app.parse(rev);
  } catch (const CLI::CallForHelp &e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp &e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*train_cmd)
      return run_train(train, out);
    if (*sample_cmd)
      return run_sample(sample, out, err);
    if (*ps_cmd)
      return run_predict_size(ps_checkpoint, ps_input, out);
    if (*eval_cmd)
      return run_evaluate(eval, out);
    if (*toy_cmd)
      return run_gen_toy(toy, out);
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int cli_main(int argc, const char *const *argv) {
  return cli_main(std::vector<std::string>(argv, argv + argc), std::cout,
                  std::cerr);
}

}  // namespace linkdiff
