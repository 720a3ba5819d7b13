#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "brem/anchor_sampling.hpp"
#include "brem/dataset.hpp"
#include "brem/inference.hpp"
#include "brem/matrix.hpp"

namespace brem::io {

using nlohmann::json;

/// Malformed input: bad JSON syntax or a document that violates the schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

/// Parses JSON, reporting syntax errors as "<source>:<line>:<column>: message".
inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t k = 0; k < stop; ++k) {
      if (text[k] == '\n') { ++line; col = 1; } else { ++col; }
    }
    throw SchemaError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": JSON syntax error: " + e.what());
  }
}

inline json load_json(const std::filesystem::path& path) { return parse_json(read_text(path), path.string()); }

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw SchemaError(where + ": missing required field '" + key + "'");
  }
  return obj.at(key);
}

inline double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + ": expected a number");
  return v.get<double>();
}

inline std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw SchemaError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

inline Interval segment(const json& v, const std::string& where) {
  const auto s = numbers(v, where);
  if (s.size() != 2) throw SchemaError(where + ": segment must have two entries");
  if (!(s[0] <= s[1])) throw SchemaError(where + ": segment start exceeds end");
  return {s[0], s[1]};
}

inline std::string string(const json& v, const std::string& where) {
  if (!v.is_string()) throw SchemaError(where + ": expected a string");
  return v.get<std::string>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Annotations: {"classes": [...]?, "videos": {id: {"duration", "fps", "annotations": [...]}}}

inline json annotations_to_json(const Corpus& corpus) {
  json videos = json::object();
  for (const auto& v : corpus.videos) {
    json anns = json::array();
    for (const auto& a : v.actions) {
      anns.push_back({{"segment", {a.interval.start, a.interval.end}},
                      {"label", corpus.classes.at(static_cast<std::size_t>(a.label))}});
    }
    videos[v.id] = {{"duration", v.duration}, {"fps", v.fps}, {"annotations", anns}};
  }
  return {{"classes", corpus.classes}, {"videos", videos}};
}

/// Video order is lexicographic by id. Without a "classes" list the class set is
/// the sorted set of labels present.
inline Corpus annotations_from_json(const json& doc, const std::string& source = "annotations") {
  if (!doc.is_object()) throw SchemaError(source + ": top level must be an object");
  const json& videos = detail::require(doc, "videos", source);
  if (!videos.is_object()) throw SchemaError(source + ".videos: expected an object keyed by video id");
  Corpus corpus;
  if (doc.contains("classes")) {
    const json& cls = doc.at("classes");
    if (!cls.is_array()) throw SchemaError(source + ".classes: expected an array");
    for (std::size_t k = 0; k < cls.size(); ++k) {
      corpus.classes.push_back(detail::string(cls[k], source + ".classes[" + std::to_string(k) + "]"));
    }
  } else {
    std::set<std::string> labels;
    for (const auto& [id, v] : videos.items()) {
      if (!v.is_object() || !v.contains("annotations") || !v.at("annotations").is_array()) continue;
      for (const auto& a : v.at("annotations")) {
        if (a.is_object() && a.contains("label") && a.at("label").is_string()) labels.insert(a.at("label").get<std::string>());
      }
    }
    corpus.classes.assign(labels.begin(), labels.end());
  }
  for (const auto& [id, v] : videos.items()) {
    const std::string where = source + ".videos." + id;
    if (!v.is_object()) throw SchemaError(where + ": expected an object");
    VideoAnnotation video;
    video.id = id;
    video.duration = detail::number(detail::require(v, "duration", where), where + ".duration");
    video.fps = v.contains("fps") ? detail::number(v.at("fps"), where + ".fps") : 1.0;
    if (!(video.fps > 0.0)) throw SchemaError(where + ".fps: must be positive");
    const json& anns = detail::require(v, "annotations", where);
    if (!anns.is_array()) throw SchemaError(where + ".annotations: expected an array");
    for (std::size_t k = 0; k < anns.size(); ++k) {
      const std::string aw = where + ".annotations[" + std::to_string(k) + "]";
      GroundTruthAction a;
      a.interval = detail::segment(detail::require(anns[k], "segment", aw), aw + ".segment");
      const std::string label = detail::string(detail::require(anns[k], "label", aw), aw + ".label");
      try {
        a.label = corpus.class_index(label);
      } catch (const std::invalid_argument& e) {
        throw SchemaError(aw + ".label: " + e.what());
      }
      video.actions.push_back(a);
    }
    corpus.videos.push_back(std::move(video));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Detections: {"results": {id: [{"segment": [s, e], "label": str, "score": x}]}}

inline json detections_to_json(const DetectionSet& dets, const std::vector<std::string>& classes) {
  json results = json::object();
  for (const auto& [id, list] : dets) {
    json arr = json::array();
    for (const auto& d : list) {
      arr.push_back({{"segment", {d.interval.start, d.interval.end}},
                     {"label", classes.at(static_cast<std::size_t>(d.label))},
                     {"score", d.score}});
    }
    results[id] = std::move(arr);
  }
  return {{"results", results}};
}

/// Detections whose label is not in `classes` are dropped and counted.
inline DetectionSet detections_from_json(const json& doc, const std::vector<std::string>& classes,
                                         const std::string& source = "detections",
                                         std::size_t* dropped = nullptr) {
  if (!doc.is_object()) throw SchemaError(source + ": top level must be an object");
  const json& results = doc.contains("results") ? doc.at("results") : doc;
  if (!results.is_object()) throw SchemaError(source + ".results: expected an object keyed by video id");
  std::map<std::string, ClassId> index;
  for (std::size_t c = 0; c < classes.size(); ++c) index[classes[c]] = static_cast<ClassId>(c);
  DetectionSet out;
  std::size_t skipped = 0;
  for (const auto& [id, list] : results.items()) {
    const std::string where = source + ".results." + id;
    if (!list.is_array()) throw SchemaError(where + ": expected an array");
    auto& dst = out[id];
    for (std::size_t k = 0; k < list.size(); ++k) {
      const std::string dw = where + "[" + std::to_string(k) + "]";
      Detection d;
      d.interval = detail::segment(detail::require(list[k], "segment", dw), dw + ".segment");
      d.score = detail::number(detail::require(list[k], "score", dw), dw + ".score");
      d.class_score = d.score;
      const std::string label = detail::string(detail::require(list[k], "label", dw), dw + ".label");
      const auto it = index.find(label);
      if (it == index.end()) { ++skipped; continue; }
      d.label = it->second;
      dst.push_back(d);
    }
  }
  if (dropped) *dropped = skipped;
  return out;
}

// ---------------------------------------------------------------------------
// Location predictions for the inference pipeline.

inline json predictions_to_json(const std::map<std::string, std::vector<LevelPredictions>>& preds,
                                const PyramidConfig& pyramid) {
  json videos = json::object();
  for (const auto& [id, levels] : preds) {
    json lv = json::array();
    for (const auto& level : levels) {
      json arr = json::array();
      for (const auto& p : level) {
        arr.push_back({{"t", p.coarse.t},
                       {"offsets", {p.coarse.start_offset, p.coarse.end_offset}},
                       {"class_scores", p.coarse.class_scores},
                       {"quality", p.coarse.quality},
                       {"refine", {p.refined.start_refine, p.refined.end_refine}},
                       {"refined_class_scores", p.refined.class_scores},
                       {"refined_quality", p.refined.quality}});
      }
      lv.push_back(std::move(arr));
    }
    videos[id] = {{"levels", lv}};
  }
  return {{"pyramid", {{"strides", pyramid.strides}}}, {"videos", videos}};
}

struct PredictionFile {
  PyramidConfig pyramid;
  std::map<std::string, std::vector<LevelPredictions>> videos;
};

inline PredictionFile predictions_from_json(const json& doc, const std::string& source = "predictions") {
  PredictionFile out;
  const json& pyr = detail::require(doc, "pyramid", source);
  out.pyramid.strides = detail::numbers(detail::require(pyr, "strides", source + ".pyramid"),
                                        source + ".pyramid.strides");
  try {
    out.pyramid.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(source + ".pyramid: " + e.what());
  }
  const json& videos = detail::require(doc, "videos", source);
  if (!videos.is_object()) throw SchemaError(source + ".videos: expected an object");
  for (const auto& [id, v] : videos.items()) {
    const std::string where = source + ".videos." + id;
    const json& levels = detail::require(v, "levels", where);
    if (!levels.is_array() || levels.size() > out.pyramid.levels()) {
      throw SchemaError(where + ".levels: expected at most one array per pyramid level");
    }
    auto& dst = out.videos[id];
    dst.resize(out.pyramid.levels());
    for (std::size_t l = 0; l < levels.size(); ++l) {
      for (std::size_t k = 0; k < levels[l].size(); ++k) {
        const json& p = levels[l][k];
        const std::string pw = where + ".levels[" + std::to_string(l) + "][" + std::to_string(k) + "]";
        LocationPrediction lp;
        lp.coarse.level = l;
        lp.coarse.t = detail::number(detail::require(p, "t", pw), pw + ".t");
        const auto off = detail::numbers(detail::require(p, "offsets", pw), pw + ".offsets");
        if (off.size() != 2 || off[0] < 0.0 || off[1] < 0.0) {
          throw SchemaError(pw + ".offsets: need two non-negative entries");
        }
        lp.coarse.start_offset = off[0];
        lp.coarse.end_offset = off[1];
        lp.coarse.class_scores = detail::numbers(detail::require(p, "class_scores", pw), pw + ".class_scores");
        lp.coarse.quality = detail::number(detail::require(p, "quality", pw), pw + ".quality");
        const auto ref = detail::numbers(detail::require(p, "refine", pw), pw + ".refine");
        if (ref.size() != 2) throw SchemaError(pw + ".refine: need two entries");
        lp.refined.start_refine = ref[0];
        lp.refined.end_refine = ref[1];
        lp.refined.class_scores =
            detail::numbers(detail::require(p, "refined_class_scores", pw), pw + ".refined_class_scores");
        lp.refined.quality = detail::number(detail::require(p, "refined_quality", pw), pw + ".refined_quality");
        if (lp.refined.class_scores.size() != lp.coarse.class_scores.size()) {
          throw SchemaError(pw + ": coarse and refined class score lengths differ");
        }
        dst[l].push_back(std::move(lp));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Named tensor container: {"format": "brem-tensors", "arrays": {name: {"shape": [...], "data": [...]}}}

struct NamedArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

using TensorFile = std::map<std::string, NamedArray>;

inline json tensors_to_json(const TensorFile& file) {
  json arrays = json::object();
  for (const auto& [name, a] : file) arrays[name] = {{"shape", a.shape}, {"data", a.data}};
  return {{"format", "brem-tensors"}, {"arrays", arrays}};
}

inline TensorFile tensors_from_json(const json& doc, const std::string& source = "tensors") {
  const json& arrays = detail::require(doc, "arrays", source);
  if (!arrays.is_object()) throw SchemaError(source + ".arrays: expected an object");
  TensorFile out;
  for (const auto& [name, a] : arrays.items()) {
    const std::string where = source + ".arrays." + name;
    NamedArray arr;
    const json& shape = detail::require(a, "shape", where);
    if (!shape.is_array()) throw SchemaError(where + ".shape: expected an array");
    std::size_t expected = 1;
    for (const auto& s : shape) {
      if (!s.is_number_unsigned()) throw SchemaError(where + ".shape: entries must be non-negative integers");
      arr.shape.push_back(s.get<std::size_t>());
      expected *= arr.shape.back();
    }
    arr.data = detail::numbers(detail::require(a, "data", where), where + ".data");
    if (arr.data.size() != expected) {
      throw SchemaError(where + ": data has " + std::to_string(arr.data.size()) + " values, shape needs " +
                        std::to_string(expected));
    }
    out[name] = std::move(arr);
  }
  return out;
}

namespace detail {

inline void put_linear(TensorFile& f, const std::string& name, const Linear& l) {
  f[name + ".weight"] = {{l.weight.rows(), l.weight.cols()}, l.weight.data()};
  f[name + ".bias"] = {{l.bias.size()}, l.bias};
}

inline Linear get_linear(const TensorFile& f, const std::string& name) {
  const auto w = f.find(name + ".weight");
  const auto b = f.find(name + ".bias");
  if (w == f.end() || b == f.end()) throw SchemaError("missing tensor '" + name + ".weight' or '" + name + ".bias'");
  if (w->second.shape.size() != 2 || b->second.shape.size() != 1 || b->second.shape[0] != w->second.shape[0]) {
    throw SchemaError("tensor '" + name + "': expected weight [out, in] and bias [out]");
  }
  return {Matrix(w->second.shape[0], w->second.shape[1], w->second.data), b->second.data};
}

}  // namespace detail

inline TensorFile bem_params_to_tensors(const BemHeadParams& p) {
  TensorFile f;
  detail::put_linear(f, "projection", p.projection);
  detail::put_linear(f, "start_head", p.start_head);
  detail::put_linear(f, "end_head", p.end_head);
  if (!p.reduction.fc.weight.empty()) detail::put_linear(f, "reduction.fc", p.reduction.fc);
  if (!p.reduction.mean_and_max.weight.empty()) detail::put_linear(f, "reduction.mean_and_max", p.reduction.mean_and_max);
  return f;
}

inline BemHeadParams bem_params_from_tensors(const TensorFile& f) {
  BemHeadParams p;
  p.projection = detail::get_linear(f, "projection");
  p.start_head = detail::get_linear(f, "start_head");
  p.end_head = detail::get_linear(f, "end_head");
  if (f.count("reduction.fc.weight")) p.reduction.fc = detail::get_linear(f, "reduction.fc");
  if (f.count("reduction.mean_and_max.weight")) p.reduction.mean_and_max = detail::get_linear(f, "reduction.mean_and_max");
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("BEM parameters: ") + e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Matrix dumps and CSV.

inline std::string format_double(double v, int precision = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

inline std::string format_fixed(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// One line per row, comma separated, full round-trip precision.
inline std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline Matrix matrix_from_csv(const std::string& text) {
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t n = 0;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      data.push_back(std::stod(cell));
      ++n;
    }
    if (rows == 0) cols = n;
    else if (n != cols) throw SchemaError("matrix csv: row " + std::to_string(rows + 1) + " has " +
                                          std::to_string(n) + " columns, expected " + std::to_string(cols));
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

inline constexpr char kMatrixMagic[8] = {'B', 'R', 'E', 'M', 'M', 'A', 'T', '1'};

/// Binary dump: 8-byte magic, uint64 rows, uint64 cols (little endian), then row-major float64.
inline std::string matrix_to_binary(const Matrix& m) {
  std::string out(kMatrixMagic, sizeof kMatrixMagic);
  auto put_u64 = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
  };
  put_u64(m.rows());
  put_u64(m.cols());
  for (double v : m.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(bits);
  }
  return out;
}

inline Matrix matrix_from_binary(const std::string& bytes) {
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kMatrixMagic, 8) != 0) {
    throw SchemaError("matrix binary: bad header");
  }
  std::size_t pos = 8;
  auto get_u64 = [&]() {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * b);
    return v;
  };
  const auto rows = get_u64(), cols = get_u64();
  if (bytes.size() != 24 + 8 * rows * cols) throw SchemaError("matrix binary: truncated payload");
  std::vector<double> data(rows * cols);
  for (auto& v : data) {
    const std::uint64_t bits = get_u64();
    std::memcpy(&v, &bits, sizeof v);
  }
  return Matrix(rows, cols, std::move(data));
}

/// Minimal CSV table with a fixed header.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw std::invalid_argument("CsvTable: row width mismatch");
    rows_.push_back(std::move(row));
  }

  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& row(std::size_t r) const { return rows_[r]; }
  const std::vector<std::string>& header() const { return header_; }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) out += ',';
        out += cells[k];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace brem::io
