/*
 * Copyright 2026 The Syncwatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "syncwatch/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace syncwatch {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written in host byte order");

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
  if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Feature files
// ---------------------------------------------------------------------------

std::string_view to_string(FileKind kind) {
  switch (kind) {
    case FileKind::kAffinity: return "affinity";
    case FileKind::kDistribution: return "distribution";
    case FileKind::kDiscrete: return "discrete";
    case FileKind::kActivation: return "activation";
    case FileKind::kRaster: return "raster";
  }
  return "unknown";
}

FileKind file_kind_from_string(std::string_view name) {
  for (auto kind : {FileKind::kAffinity, FileKind::kDistribution, FileKind::kDiscrete,
                    FileKind::kActivation, FileKind::kRaster}) {
    if (to_string(kind) == name) return kind;
  }
  throw DataError("unknown feature file kind '" + std::string(name) + "'");
}

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double parse_real(const std::string& token, const std::string& where) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v)) {
    throw DataError(where + ": cannot parse value '" + token + "'");
  }
  return v;
}

int parse_int(const std::string& token, const std::string& where) {
  const double v = parse_real(token, where);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw DataError(where + ": expected an integer, got '" + token + "'");
  }
  return static_cast<int>(v);
}

// Prints a distribution row so that the printed values sum to one within
// half a unit in the ninth digit: the largest entry absorbs the residual.
void append_distribution_row(std::string& out, const RowMatrix& rows, Eigen::Index r) {
  Eigen::Index largest = 0;
  rows.row(r).maxCoeff(&largest);
  std::vector<std::string> cells(rows.cols());
  double others = 0.0;
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    if (j == largest) continue;
    cells[j] = format_real(rows(r, j));
    others += std::strtod(cells[j].c_str(), nullptr);
  }
  cells[largest] = format_real(1.0 - others);
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    if (j > 0) out += ',';
    out += cells[j];
  }
}

}  // namespace

FeatureFile parse_feature_file(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line) || line != "# avsf v1") {
    throw DataError(name + ": missing '# avsf v1' header");
  }
  FeatureFile file;
  std::optional<FileKind> kind;
  std::optional<int> tau, fps, dim;
  std::vector<std::vector<std::string>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    if (line[0] == '#') {
      if (!rows.empty()) throw DataError(where + ": header line after data");
      const auto eq = line.find('=');
      if (line.size() < 3 || eq == std::string::npos) throw DataError(where + ": malformed header");
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "kind") {
        kind = file_kind_from_string(value);
      } else if (key == "tau") {
        tau = parse_int(value, where);
      } else if (key == "fps") {
        fps = parse_int(value, where);
      } else if (key == "dim") {
        dim = parse_int(value, where);
      } else if (key == "source") {
        if (value == "audio_visual") {
          file.source = ActivationSource::kAudioVisual;
        } else if (value == "visual_only") {
          file.source = ActivationSource::kVisualOnly;
        } else {
          throw DataError(where + ": unknown activation source '" + value + "'");
        }
      } else {
        throw DataError(where + ": unknown header key '" + key + "'");
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  if (!kind || !tau || !fps || !dim) {
    throw DataError(name + ": header must define kind, tau, fps and dim");
  }
  file.kind = *kind;
  file.window = DelayWindowConfig{*tau, *fps};
  try {
    file.window.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(name + ": " + e.what());
  }
  if (*dim < 1) throw DataError(name + ": dim must be >= 1");
  if (rows.empty()) throw DataError(name + ": no data rows");

  const int width = file.window.width();
  const int expected_dim = [&] {
    switch (file.kind) {
      case FileKind::kAffinity:
      case FileKind::kDistribution:
      case FileKind::kRaster: return width;
      case FileKind::kDiscrete: return 1;
      case FileKind::kActivation: return *dim;
    }
    return *dim;
  }();
  if (*dim != expected_dim) {
    throw DataError(name + ": dim=" + std::to_string(*dim) + " but kind " +
                    std::string(to_string(file.kind)) + " needs " + std::to_string(expected_dim));
  }

  file.data.resize(static_cast<Eigen::Index>(rows.size()), *dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string where = name + ": data row " + std::to_string(r);
    if (static_cast<int>(rows[r].size()) != *dim) {
      throw DataError(where + " has " + std::to_string(rows[r].size()) + " values, expected " +
                      std::to_string(*dim));
    }
    for (int c = 0; c < *dim; ++c) {
      const auto row = static_cast<Eigen::Index>(r);
      switch (file.kind) {
        case FileKind::kDiscrete: {
          const int d = parse_int(rows[r][c], where);
          if (d < -file.window.tau || d > file.window.tau) {
            throw DataError(where + ": offset " + std::to_string(d) + " outside [-tau, tau]");
          }
          file.data(row, c) = d;
          break;
        }
        case FileKind::kRaster: {
          const int code = parse_int(rows[r][c], where);
          if (code < 0) throw DataError(where + ": negative raster code");
          file.data(row, c) = code;
          break;
        }
        default: file.data(row, c) = parse_real(rows[r][c], where);
      }
    }
  }

  if (file.kind == FileKind::kDistribution) {
    for (Eigen::Index r = 0; r < file.data.rows(); ++r) {
      if (file.data.row(r).minCoeff() < 0.0) {
        throw DataError(name + ": distribution row " + std::to_string(r) + " has negative entries");
      }
      const double sum = file.data.row(r).sum();
      const double off = std::abs(sum - 1.0);
      if (off > 1e-6) {
        throw DataError(name + ": distribution row " + std::to_string(r) + " sums to " +
                        format_real(sum));
      }
      if (off > DelayDistributionSequence::kRowSumTolerance) file.data.row(r) /= sum;
    }
  }
  return file;
}

FeatureFile read_feature_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file " + path.string());
  return parse_feature_file(in, path.string());
}

std::string format_feature_file(const FeatureFile& file) {
  std::string out = "# avsf v1\n";
  out += "# kind=" + std::string(to_string(file.kind)) + "\n";
  out += "# tau=" + std::to_string(file.window.tau) + "\n";
  out += "# fps=" + std::to_string(file.window.fps) + "\n";
  out += "# dim=" + std::to_string(file.data.cols()) + "\n";
  if (file.kind == FileKind::kActivation && file.source == ActivationSource::kVisualOnly) {
    out += "# source=visual_only\n";
  }
  for (Eigen::Index r = 0; r < file.data.rows(); ++r) {
    if (file.kind == FileKind::kDistribution) {
      append_distribution_row(out, file.data, r);
    } else {
      for (Eigen::Index c = 0; c < file.data.cols(); ++c) {
        if (c > 0) out += ',';
        out += format_real(file.data(r, c));
      }
    }
    out += '\n';
  }
  return out;
}

void write_feature_file(const fs::path& path, const FeatureFile& file) {
  write_text(path, format_feature_file(file));
}

FeatureFile make_feature_file(const AffinitySequence& aff) {
  return {FileKind::kAffinity, aff.config(), aff.values(), ActivationSource::kAudioVisual};
}

FeatureFile make_feature_file(const DelayDistributionSequence& dist) {
  return {FileKind::kDistribution, dist.config(), dist.rows(), ActivationSource::kAudioVisual};
}

FeatureFile make_feature_file(const DiscreteDelaySequence& delays) {
  RowMatrix data(delays.frames(), 1);
  for (int i = 0; i < delays.frames(); ++i) data(i, 0) = delays.delays()[i];
  return {FileKind::kDiscrete, delays.config(), std::move(data), ActivationSource::kAudioVisual};
}

FeatureFile make_feature_file(const ActivationSequence& acts, const DelayWindowConfig& window) {
  return {FileKind::kActivation, window, acts.values(), acts.source()};
}

FeatureFile make_raster_file(const FeatureSequence& codes) {
  if (codes.kind() != FeatureKind::kRasterCodes) {
    throw std::invalid_argument("make_raster_file: not a raster code grid");
  }
  return {FileKind::kRaster, codes.config(), codes.data(), ActivationSource::kAudioVisual};
}

namespace {

[[noreturn]] void wrong_kind(const FeatureFile& file, std::string_view wanted) {
  throw DataError("cannot build " + std::string(wanted) + " from a " +
                  std::string(to_string(file.kind)) + " file");
}

}  // namespace

DelayDistributionSequence distribution_of(const FeatureFile& file) {
  switch (file.kind) {
    case FileKind::kAffinity: return normalize_affinities(AffinitySequence(file.data, file.window));
    case FileKind::kDistribution: return DelayDistributionSequence(file.data, file.window);
    default: wrong_kind(file, "a delay distribution");
  }
}

DiscreteDelaySequence discrete_delays_of(const FeatureFile& file) {
  if (file.kind == FileKind::kDiscrete) {
    std::vector<int> delays(file.data.rows());
    for (Eigen::Index i = 0; i < file.data.rows(); ++i) {
      delays[i] = static_cast<int>(file.data(i, 0));
    }
    return DiscreteDelaySequence(std::move(delays), file.window);
  }
  return argmax_delays(distribution_of(file));
}

ActivationSequence activations_of(const FeatureFile& file) {
  if (file.kind != FileKind::kActivation) wrong_kind(file, "activations");
  return ActivationSequence(file.data, file.source);
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

fs::path DatasetManifest::resolve(const std::string& relative) const {
  const fs::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest read_manifest(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_array()) throw DataError(path.string() + ": manifest must be a JSON array");
  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const std::string where = path.string() + ": record " + std::to_string(i);
    if (!rec.is_object() || !rec.contains("path") || !rec["path"].is_string() ||
        !rec.contains("label") || !rec["label"].is_number_integer()) {
      throw DataError(where + ": needs string 'path' and integer 'label'");
    }
    ManifestRecord out;
    out.path = rec["path"].get<std::string>();
    out.label = rec["label"].get<int>();
    if (out.label != 0 && out.label != 1) throw DataError(where + ": label must be 0 or 1");
    if (rec.contains("category") && !rec["category"].is_null()) {
      out.category = rec["category"].get<std::string>();
    }
    if (rec.contains("interval") && !rec["interval"].is_null()) {
      const auto& iv = rec["interval"];
      if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number_integer() ||
          !iv[1].is_number_integer()) {
        throw DataError(where + ": interval must be [start, end)");
      }
      out.interval = FrameInterval{iv[0].get<int>(), iv[1].get<int>()};
      if (out.interval->first < 0 || out.interval->first >= out.interval->second) {
        throw DataError(where + ": interval must satisfy 0 <= start < end");
      }
    }
    if (rec.contains("activations") && !rec["activations"].is_null()) {
      out.activations = rec["activations"].get<std::string>();
    }
    manifest.records.push_back(std::move(out));
  }
  return manifest;
}

std::string format_manifest(const std::vector<ManifestRecord>& records) {
  json doc = json::array();
  for (const auto& r : records) {
    json rec = {{"path", r.path}, {"label", r.label}};
    if (r.category) rec["category"] = *r.category;
    if (r.interval) rec["interval"] = {r.interval->first, r.interval->second};
    if (r.activations) rec["activations"] = *r.activations;
    doc.push_back(std::move(rec));
  }
  return doc.dump(2) + "\n";
}

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
  write_text(path, format_manifest(records));
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

json model_cfg_json(const ArConfig& c) {
  return {{"n_blocks", c.n_blocks},   {"n_heads", c.n_heads},
          {"d_model", c.d_model},     {"d_in", c.d_in},
          {"d_out", c.d_out},         {"n_max", c.n_max},
          {"dropout_rate", c.dropout_rate}, {"head", std::string(to_string(c.head))},
          {"raster_k", c.raster_k}};
}

ArConfig model_cfg_from(const json& j) {
  ArConfig c;
  c.n_blocks = j.at("n_blocks").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.d_in = j.at("d_in").get<int>();
  c.d_out = j.at("d_out").get<int>();
  c.n_max = j.at("n_max").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.head = output_head_from_string(j.at("head").get<std::string>());
  c.raster_k = j.at("raster_k").get<int>();
  return c;
}

json train_cfg_json(const TrainConfig& c) {
  return {{"lr_max", c.lr_max},           {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},   {"warmup_steps", c.warmup_steps},
          {"total_steps", c.total_steps}, {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},   {"adam_eps", c.adam_eps},
          {"grad_clip", c.grad_clip},     {"seed", c.seed},
          {"loss", std::string(to_string(c.loss))}};
}

TrainConfig train_cfg_from(const json& j) {
  TrainConfig c;
  c.lr_max = j.at("lr_max").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.warmup_steps = j.at("warmup_steps").get<int>();
  c.total_steps = j.at("total_steps").get<int>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.loss = loss_kind_from_string(j.at("loss").get<std::string>());
  return c;
}

struct NamedTensor {
  std::string name;
  Mat<float> values;
};

std::vector<NamedTensor> checkpoint_tensors(const Checkpoint& ckpt) {
  std::vector<NamedTensor> out;
  ckpt.params.visit([&](const std::string& name, const Mat<float>& t, TensorRole) {
    out.push_back({name, t});
  });
  if (ckpt.pca) {
    out.push_back({"pca.mean", ckpt.pca->mean.transpose().cast<float>()});
    out.push_back({"pca.components", ckpt.pca->components.cast<float>()});
    out.push_back({"pca.eigenvalues", ckpt.pca->eigenvalues.transpose().cast<float>()});
  }
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto tensors = checkpoint_tensors(ckpt);
  json index = json::array();
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    index.push_back({{"name", t.name},
                     {"shape", {t.values.rows(), t.values.cols()}},
                     {"offset_elems", offset}});
    offset += static_cast<std::size_t>(t.values.size());
  }
  json header = {{"format", std::string(kCheckpointFormat)},
                 {"model_cfg", model_cfg_json(ckpt.params.config)},
                 {"train_cfg", train_cfg_json(ckpt.train_cfg)},
                 {"feature_kind", std::string(to_string(ckpt.feature_kind))},
                 {"window",
                  {{"tau", ckpt.window.tau},
                   {"fps", ckpt.window.fps},
                   {"frames", ckpt.window_frames},
                   {"stride", ckpt.window_stride}}},
                 {"tensors", index}};
  if (ckpt.codebook) header["codebook"] = ckpt.codebook->centers;

  std::string out = header.dump() + "\n";
  const std::size_t header_size = out.size();
  out.resize(header_size + offset * sizeof(float));
  char* cursor = out.data() + header_size;
  for (const auto& t : tensors) {
    const std::size_t bytes = static_cast<std::size_t>(t.values.size()) * sizeof(float);
    std::memcpy(cursor, t.values.data(), bytes);
    cursor += bytes;
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) throw DataError("checkpoint: missing header line");
  json header;
  try {
    header = json::parse(bytes.substr(0, newline));
  } catch (const json::parse_error& e) {
    throw DataError(std::string("checkpoint: invalid header: ") + e.what());
  }
  if (header.value("format", std::string()) != kCheckpointFormat) {
    throw DataError("checkpoint: unsupported format");
  }
  Checkpoint ckpt;
  try {
    const ArConfig cfg = model_cfg_from(header.at("model_cfg"));
    ckpt.params = zero_params<float>(cfg);
    ckpt.train_cfg = train_cfg_from(header.at("train_cfg"));
    ckpt.feature_kind = feature_kind_from_string(header.at("feature_kind").get<std::string>());
    const auto& w = header.at("window");
    ckpt.window = DelayWindowConfig{w.at("tau").get<int>(), w.at("fps").get<int>()};
    ckpt.window_frames = w.at("frames").get<int>();
    ckpt.window_stride = w.at("stride").get<int>();
    if (header.contains("codebook")) {
      ckpt.codebook = Codebook{header["codebook"].get<std::vector<double>>()};
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }

  const char* payload = bytes.data() + newline + 1;
  const std::size_t payload_bytes = bytes.size() - newline - 1;
  std::size_t expected = 0;
  std::map<std::string, Mat<float>> loaded;
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    const auto offset = entry.at("offset_elems").get<std::size_t>();
    if (offset != expected) throw DataError("checkpoint: tensor " + name + " is out of order");
    const std::size_t count = static_cast<std::size_t>(rows * cols);
    if ((offset + count) * sizeof(float) > payload_bytes) {
      throw DataError("checkpoint: payload too short for tensor " + name);
    }
    Mat<float> t(rows, cols);
    std::memcpy(t.data(), payload + offset * sizeof(float), count * sizeof(float));
    loaded.emplace(name, std::move(t));
    expected = offset + count;
  }
  if (expected * sizeof(float) != payload_bytes) {
    throw DataError("checkpoint: payload length does not match the tensor index");
  }

  ckpt.params.visit([&](const std::string& name, Mat<float>& t, TensorRole) {
    const auto it = loaded.find(name);
    if (it == loaded.end()) throw DataError("checkpoint: missing tensor " + name);
    if (it->second.rows() != t.rows() || it->second.cols() != t.cols()) {
      throw DataError("checkpoint: tensor " + name + " has the wrong shape");
    }
    t = it->second;
  });
  if (loaded.contains("pca.mean")) {
    PcaModel pca;
    pca.mean = loaded.at("pca.mean").row(0).transpose().cast<double>();
    pca.components = loaded.at("pca.components").cast<double>();
    pca.eigenvalues = loaded.at("pca.eigenvalues").row(0).transpose().cast<double>();
    ckpt.pca = std::move(pca);
  }
  return ckpt;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  write_text(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const fs::path& path) { return parse_checkpoint(read_text(path)); }

FeatureSequence build_features(const Checkpoint& ckpt, const FeatureFile& primary,
                               const std::optional<FeatureFile>& activations) {
  const auto require_pca = [&]() -> const PcaModel& {
    if (!ckpt.pca) throw DataError("checkpoint has no PCA model");
    return *ckpt.pca;
  };
  const auto activation_source = [&]() -> ActivationSequence {
    if (primary.kind == FileKind::kActivation) return activations_of(primary);
    if (!activations) {
      throw DataError("feature set " + std::string(to_string(ckpt.feature_kind)) +
                      " needs activations, but the input is a " +
                      std::string(to_string(primary.kind)) + " file");
    }
    return activations_of(*activations);
  };

  switch (ckpt.feature_kind) {
    case FeatureKind::kDistribution: return to_feature(distribution_of(primary));
    case FeatureKind::kDiscreteDelay: return to_feature(discrete_delays_of(primary));
    case FeatureKind::kRasterCodes: {
      if (primary.kind == FileKind::kRaster) {
        return FeatureSequence(FeatureKind::kRasterCodes, primary.data, primary.window);
      }
      if (!ckpt.codebook) throw DataError("checkpoint has no codebook");
      return quantize_grid(distribution_of(primary), *ckpt.codebook);
    }
    case FeatureKind::kActivationPca:
      return pca_project(require_pca(), activation_source(), ckpt.window);
    case FeatureKind::kConcatAv: {
      const auto dist = distribution_of(primary);
      return concat_features(dist, pca_project(require_pca(), activation_source(), ckpt.window));
    }
  }
  throw DataError("unsupported feature set");
}

void write_loss_trace(const fs::path& path, const std::vector<double>& lr,
                      const std::vector<double>& loss) {
  std::string out = "step,lr,loss\n";
  char buf[96];
  for (std::size_t i = 0; i < loss.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", i, lr[i], loss[i]);
    out += buf;
  }
  write_text(path, out);
}

void write_frame_csv(const fs::path& path, const ScoreReport& report) {
  std::string out = "frame,score,cumulative\n";
  char buf[96];
  for (std::size_t i = 0; i < report.frame_scores.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", i, report.frame_scores[i],
                  report.cumulative[i]);
    out += buf;
  }
  write_text(path, out);
}

}  // namespace syncwatch
