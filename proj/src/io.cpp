//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "linkdiff/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "linkdiff/error.hpp"

namespace linkdiff {

using nlohmann::json;

const std::string &XyzRecord::id() const {
  static const std::string empty;
  auto it = meta.find("id");
  return it == meta.end() ? empty : it->second;
}

namespace {
  std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
        ++i;
      std::size_t j = i;
      while (j < line.size()
             && !std::isspace(static_cast<unsigned char>(line[j])))
        ++j;
      if (j > i)
        out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }

  [[noreturn]] void parse_fail(int lineno, const std::string &what) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(lineno) + ": " + what);
  }

  double parse_real(std::string_view tok, int lineno) {
    double v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v))
      parse_fail(lineno, "bad coordinate '" + std::string(tok) + "'");
    return v;
  }

  bool parse_flag(std::string_view tok, int lineno) {
    if (tok == "0")
      return false;
    if (tok == "1")
      return true;
    parse_fail(lineno, "flag must be 0 or 1, got '" + std::string(tok) + "'");
  }

  std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    // Avoid printing negative zero.
    if (std::string_view(buf) == "-0.000000")
      return "0.000000";
    return buf;
  }
}  // namespace

std::vector<XyzRecord> parse_extxyz(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }

  std::vector<XyzRecord> records;
  std::size_t k = 0;
  while (k < lines.size()) {
    const auto head = split_ws(lines[k]);
    if (head.empty()) {
      ++k;
      continue;
    }
    const int head_line = static_cast<int>(k) + 1;
    int n = 0;
    auto [p, ec] = std::from_chars(head[0].data(),
                                   head[0].data() + head[0].size(), n);
    if (head.size() != 1 || ec != std::errc()
        || p != head[0].data() + head[0].size() || n < 0)
      parse_fail(head_line, "expected atom count");
    if (k + 1 >= lines.size())
      parse_fail(head_line + 1, "missing metadata line");

    XyzRecord rec;
    for (std::string_view tok: split_ws(lines[k + 1])) {
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos || eq == 0)
        parse_fail(head_line + 1,
                   "metadata must be key=value, got '" + std::string(tok) + "'");
      rec.meta[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
    }
    rec.cloud.coords.resize(n, 3);
    rec.cloud.elements.reserve(n);
    rec.cloud.flags.reserve(n);
    for (int i = 0; i < n; ++i) {
      const std::size_t li = k + 2 + i;
      const int lineno = static_cast<int>(li) + 1;
      if (li >= lines.size())
        parse_fail(lineno, "record ends early");
      const auto f = split_ws(lines[li]);
      if (f.size() != 8)
        parse_fail(lineno, "expected 8 fields per atom");
      rec.cloud.elements.emplace_back(f[0]);
      for (int c = 0; c < 3; ++c)
        rec.cloud.coords(i, c) = parse_real(f[1 + c], lineno);
      AtomFlags fl;
      fl.fragment = parse_flag(f[4], lineno);
      fl.anchor = parse_flag(f[5], lineno);
      fl.pocket = parse_flag(f[6], lineno);
      fl.linker = parse_flag(f[7], lineno);
      if (int(fl.fragment) + int(fl.pocket) + int(fl.linker) != 1
          || (fl.anchor && !fl.fragment))
        parse_fail(lineno, "atom needs exactly one role; anchors are "
                           "fragment atoms");
      rec.cloud.flags.push_back(fl);
    }
    records.push_back(std::move(rec));
    k += 2 + static_cast<std::size_t>(n);
  }
  return records;
}

std::string write_extxyz(const std::vector<XyzRecord> &records) {
  std::string out;
  for (const XyzRecord &rec: records) {
    const PointCloud &c = rec.cloud;
    out += std::to_string(c.size()) + '\n';
    // id and role lead, remaining keys follow in sorted order.
    std::string meta;
    for (const char *lead: { "id", "role" }) {
      auto it = rec.meta.find(lead);
      if (it != rec.meta.end())
        meta += (meta.empty() ? "" : " ") + it->first + '=' + it->second;
    }
    for (const auto &[key, value]: rec.meta) {
      if (key == "id" || key == "role")
        continue;
      meta += (meta.empty() ? "" : " ") + key + '=' + value;
    }
    out += meta + '\n';
    for (int i = 0; i < c.size(); ++i) {
      const AtomFlags &f = c.flags[i];
      out += c.elements[i];
      for (int k = 0; k < 3; ++k)
        out += ' ' + fmt6(c.coords(i, k));
      out += ' ';
      out += f.fragment ? '1' : '0';
      out += ' ';
      out += f.anchor ? '1' : '0';
      out += ' ';
      out += f.pocket ? '1' : '0';
      out += ' ';
      out += f.linker ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

std::string read_text_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kIoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string &path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out)
    throw Error(ErrorCode::kIoError, "write failed for '" + path + "'");
}

std::vector<XyzRecord> read_extxyz_file(const std::string &path) {
  try {
    return parse_extxyz(read_text_file(path));
  } catch (const Error &e) {
    if (e.code() != ErrorCode::kParseError)
      throw;
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
}

void write_extxyz_file(const std::string &path,
                       const std::vector<XyzRecord> &records) {
  write_text_file(path, write_extxyz(records));
}

// ---------------------------------------------------------------------------
// Manifest

std::string DatasetManifest::to_json() const {
  json j;
  j["vocab"] = vocab;
  j["size_classes"] = size_classes;
  j["splits"] = splits;
  j["framing"] = to_string(framing);
  j["pocket"] = pocket;
  return j.dump(2) + '\n';
}

DatasetManifest DatasetManifest::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    DatasetManifest m;
    m.vocab = j.at("vocab").get<std::vector<std::string>>();
    m.size_classes = j.at("size_classes").get<std::vector<int>>();
    m.splits = j.value("splits",
                       std::map<std::string, std::vector<std::string>>{});
    m.framing = frame_mode_from_string(j.value("framing", "anchor_centroid"));
    m.pocket = j.value("pocket", false);
    return m;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::kParseError,
                std::string("manifest: ") + e.what());
  }
}

void DatasetManifest::check(const std::vector<XyzRecord> &records) const {
  std::set<std::string> ids;
  for (const auto &r: records) {
    ids.insert(r.id());
    const int n = static_cast<int>(r.cloud.linker().size());
    if (n > 0
        && !std::binary_search(size_classes.begin(), size_classes.end(), n))
      throw Error(ErrorCode::kInvalidConfig,
                  "record " + r.id() + " has linker size "
                      + std::to_string(n) + " outside size_classes");
  }
  for (const auto &[split, members]: splits)
    for (const auto &id: members)
      if (!ids.count(id))
        throw Error(ErrorCode::kInvalidConfig,
                    "split " + split + " names unknown record " + id);
}

// ---------------------------------------------------------------------------
// Run config

namespace {
  json model_fields(const DiffusionConfig &d) {
    json j;
    j["schedule"] = { { "T", d.T }, { "s", d.s } };
    j["model"] = { { "nf", d.nf },
                   { "L", d.layers },
                   { "edge_mode", to_string(d.edge_mode) },
                   { "cutoff", d.cutoff } };
    j["framing"] = to_string(d.frame);
    j["frame_includes_pocket"] = d.frame_includes_pocket;
    j["pocket_flag"] = d.pocket_flag;
    j["vocab"] = d.vocab;
    j["lift_scale"] = d.lift_scale;
    return j;
  }

  json size_fields(const SizeModelConfig &c) {
    return { { "nf", c.nf },
             { "L", c.layers },
             { "vocab", c.vocab },
             { "size_classes", c.size_classes } };
  }

  std::string fnv1a_hex(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c: s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
  }
}  // namespace

RunConfig RunConfig::from_json(std::string_view text) {
  RunConfig cfg;
  try {
    const json j = json::parse(text);
    DiffusionConfig &d = cfg.diffusion;
    if (j.contains("schedule")) {
      const json &s = j["schedule"];
      d.T = s.value("T", d.T);
      d.s = s.value("s", d.s);
    }
    if (j.contains("model")) {
      const json &m = j["model"];
      d.nf = m.value("nf", d.nf);
      d.layers = m.value("L", d.layers);
      if (m.contains("edge_mode"))
        d.edge_mode = edge_mode_from_string(m["edge_mode"].get<std::string>());
      d.cutoff = m.value("cutoff", d.cutoff);
    }
    if (j.contains("framing"))
      d.frame = frame_mode_from_string(j["framing"].get<std::string>());
    d.frame_includes_pocket =
        j.value("frame_includes_pocket", d.frame_includes_pocket);
    d.pocket_flag = j.value("pocket_flag", d.pocket_flag);
    if (j.contains("vocab"))
      d.vocab = j["vocab"].get<std::vector<std::string>>();
    d.lift_scale = j.value("lift_scale", d.lift_scale);

    AdamOptions &a = cfg.training.adam;
    if (j.contains("optimizer")) {
      const json &o = j["optimizer"];
      a.lr = o.value("lr", a.lr);
      a.beta1 = o.value("beta1", a.beta1);
      a.beta2 = o.value("beta2", a.beta2);
      a.eps = o.value("eps", a.eps);
      a.weight_decay = o.value("weight_decay", a.weight_decay);
      a.clip_norm = o.value("clip_norm", a.clip_norm);
    }
    if (j.contains("training")) {
      const json &t = j["training"];
      cfg.training.epochs = t.value("epochs", cfg.training.epochs);
      cfg.training.batch_size = t.value("batch_size", cfg.training.batch_size);
    }

    SizeModelConfig &sm = cfg.size_model;
    sm.vocab = d.vocab;
    cfg.size_training.adam = a;
    if (j.contains("size_model")) {
      const json &s = j["size_model"];
      sm.nf = s.value("nf", sm.nf);
      sm.layers = s.value("L", sm.layers);
      cfg.size_training.epochs = s.value("epochs", cfg.size_training.epochs);
      cfg.size_training.batch_size =
          s.value("batch_size", cfg.size_training.batch_size);
      cfg.size_training.adam.lr = s.value("lr", cfg.size_training.adam.lr);
    }
    if (j.contains("size_classes"))
      sm.size_classes = j["size_classes"].get<std::vector<int>>();
  } catch (const json::exception &e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config: ") + e.what());
  }
  cfg.diffusion.validate();
  return cfg;
}

std::string RunConfig::to_json() const {
  json j = model_fields(diffusion);
  const AdamOptions &a = training.adam;
  j["optimizer"] = { { "lr", a.lr },
                     { "beta1", a.beta1 },
                     { "beta2", a.beta2 },
                     { "eps", a.eps },
                     { "weight_decay", a.weight_decay },
                     { "clip_norm", a.clip_norm } };
  j["training"] = { { "epochs", training.epochs },
                    { "batch_size", training.batch_size } };
  j["size_model"] = { { "nf", size_model.nf },
                      { "L", size_model.layers },
                      { "epochs", size_training.epochs },
                      { "batch_size", size_training.batch_size },
                      { "lr", size_training.adam.lr } };
  j["size_classes"] = size_model.size_classes;
  return j.dump(2) + '\n';
}

std::string RunConfig::model_hash() const {
  return fnv1a_hex(model_fields(diffusion).dump());
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_diffusion_checkpoint(const std::string &path,
                               const DiffusionModel &model,
                               const RunConfig &cfg) {
  json meta;
  meta["kind"] = "diffusion";
  meta["config"] = json::parse(cfg.to_json());
  meta["hash"] = cfg.model_hash();
  save_weights(path, model.egnn().params(), meta.dump());
}

LoadedDiffusion load_diffusion_checkpoint(const std::string &path) {
  LoadedWeights w = load_weights(path);
  LoadedDiffusion out;
  try {
    const json meta = json::parse(w.metadata);
    if (meta.value("kind", "") != "diffusion")
      throw Error(ErrorCode::kParseError,
                  path + ": not a diffusion checkpoint");
    out.config = RunConfig::from_json(meta.at("config").dump());
    out.hash = meta.at("hash").get<std::string>();
  } catch (const json::exception &e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  out.model = std::make_unique<DiffusionModel>(out.config.diffusion, 0);
  assign_weights(out.model->egnn().params(), w);
  return out;
}

void save_size_checkpoint(const std::string &path, const SizeModel &model) {
  json meta;
  meta["kind"] = "size";
  meta["config"] = size_fields(model.config());
  save_weights(path, model.params(), meta.dump());
}

std::unique_ptr<SizeModel> load_size_checkpoint(const std::string &path) {
  LoadedWeights w = load_weights(path);
  SizeModelConfig cfg;
  try {
    const json meta = json::parse(w.metadata);
    if (meta.value("kind", "") != "size")
      throw Error(ErrorCode::kParseError, path + ": not a size checkpoint");
    const json &c = meta.at("config");
    cfg.nf = c.at("nf").get<int>();
    cfg.layers = c.at("L").get<int>();
    cfg.vocab = c.at("vocab").get<std::vector<std::string>>();
    cfg.size_classes = c.at("size_classes").get<std::vector<int>>();
  } catch (const json::exception &e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  auto model = std::make_unique<SizeModel>(cfg, 0);
  assign_weights(model->params(), w);
  return model;
}

}  // namespace linkdiff
