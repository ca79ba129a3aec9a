#pragma once

// File formats. Everything text-based writes numbers via format_double
// (shortest lossless decimal), builds the whole file in memory, and lands
// on disk through write-to-temp + rename, so readers never observe a
// partial file. Versioned formats reject unknown schema versions with
// VersionError; malformed content raises ParseError with a 1-based line
// number where one makes sense.
//
// Formats:
//   model      ASCII PLY, vertex x/y/z properties (binary -> UnsupportedFormat)
//   scene      "votepose-scene 1" text block, lossless round trip
//   prediction JSON object, or little-endian binary ("VPPB" magic)
//   keypoints  JSON object {version, class_id, method, m, keypoints}
//   registry   directory with registry.json naming per-class PLY files
//   results    CSV frame_id,class_id,instance_id,add,adds,symmetric,
//              invisible_fraction, sorted by (frame_id, instance_id)
//   estimates  CSV, one pose row per pipeline cluster
//   curves     CSV threshold,accuracy rows plus a final auc summary row

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "votepose/errors.hpp"
#include "votepose/geometry.hpp"
#include "votepose/keypoints.hpp"
#include "votepose/metrics.hpp"
#include "votepose/number_io.hpp"
#include "votepose/registry.hpp"
#include "votepose/simulation.hpp"
#include "votepose/voting.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary prediction format is little-endian");

namespace votepose {

/// Writes `content` to `path` atomically: a sibling temp file is written,
/// flushed, and renamed over the target only on success.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("failed to move temp file onto " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::vector<std::string_view> split_char(std::string_view line,
                                                char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

/// Line-oriented reader that keeps a 1-based line counter for ParseError.
class LineReader {
 public:
  LineReader(std::string content, std::string path)
      : content_(std::move(content)), path_(std::move(path)) {}

  bool next(std::string_view& line) {
    if (pos_ >= content_.size()) return false;
    std::size_t end = content_.find('\n', pos_);
    if (end == std::string::npos) end = content_.size();
    line = std::string_view(content_).substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++line_number_;
    return true;
  }

  std::string_view require(const char* what) {
    std::string_view line;
    if (!next(line)) {
      throw ParseError(path_, line_number_ + 1,
                       std::string("unexpected end of file, expected ") + what);
    }
    return line;
  }

  std::size_t line_number() const { return line_number_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(path_, line_number_, msg);
  }

 private:
  std::string content_;
  std::string path_;
  std::size_t pos_ = 0;
  std::size_t line_number_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// PLY models

/// Reads an ASCII PLY mesh's vertex positions into an ObjectModel
/// (faces and extra properties are ignored). Binary PLY is refused with
/// UnsupportedFormat; a declared vertex count of zero raises EmptyModel.
inline ObjectModel load_ply(const std::filesystem::path& path,
                            int class_id = 0) {
  detail::LineReader reader(read_file(path), path.string());

  std::string_view line = reader.require("ply magic");
  if (line != "ply") reader.fail("not a PLY file (missing 'ply' magic)");

  struct Element {
    std::string name;
    std::size_t count = 0;
  };
  std::vector<Element> elements;
  std::vector<std::string> vertex_properties;
  bool saw_format = false;
  bool in_vertex_element = false;

  for (;;) {
    line = reader.require("PLY header");
    const auto tokens = detail::split_ws(line);
    if (tokens.empty()) reader.fail("blank line inside PLY header");
    const std::string_view kw = tokens[0];
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      if (tokens.size() != 3) reader.fail("malformed format line");
      if (tokens[1] == "binary_little_endian" ||
          tokens[1] == "binary_big_endian") {
        throw UnsupportedFormat(path.string() +
                                ": binary PLY is not supported, "
                                "convert to ascii");
      }
      if (tokens[1] != "ascii" || tokens[2] != "1.0") {
        reader.fail("unsupported PLY format variant");
      }
      saw_format = true;
      continue;
    }
    if (kw == "element") {
      if (tokens.size() != 3) reader.fail("malformed element line");
      std::uint64_t count = 0;
      if (!parse_uint64(tokens[2], count)) {
        reader.fail("element count is not a number");
      }
      elements.push_back(Element{std::string(tokens[1]), count});
      in_vertex_element = tokens[1] == "vertex";
      continue;
    }
    if (kw == "property") {
      if (elements.empty()) reader.fail("property before any element");
      if (in_vertex_element) {
        if (tokens.size() == 3 && tokens[1] != "list") {
          vertex_properties.emplace_back(tokens[2]);
        } else {
          reader.fail("vertex element has a non-scalar property");
        }
      }
      continue;
    }
    if (kw == "end_header") break;
    reader.fail("unknown header keyword '" + std::string(kw) + "'");
  }

  if (!saw_format) reader.fail("PLY header has no format line");
  std::size_t vertex_count = 0;
  bool have_vertex = false;
  for (const Element& e : elements) {
    if (e.name == "vertex") {
      vertex_count = e.count;
      have_vertex = true;
    }
  }
  if (!have_vertex) reader.fail("PLY header declares no vertex element");
  if (vertex_count == 0) {
    throw EmptyModel(path.string() + ": PLY declares zero vertices");
  }

  std::size_t ix = vertex_properties.size();
  std::size_t iy = ix;
  std::size_t iz = ix;
  for (std::size_t i = 0; i < vertex_properties.size(); ++i) {
    if (vertex_properties[i] == "x") ix = i;
    if (vertex_properties[i] == "y") iy = i;
    if (vertex_properties[i] == "z") iz = i;
  }
  if (ix == vertex_properties.size() || iy == vertex_properties.size() ||
      iz == vertex_properties.size()) {
    reader.fail("vertex element lacks x/y/z properties");
  }

  std::vector<Vec3> points;
  points.reserve(vertex_count);
  for (const Element& e : elements) {
    if (e.name == "vertex") {
      for (std::size_t i = 0; i < e.count; ++i) {
        line = reader.require("vertex row");
        const auto tokens = detail::split_ws(line);
        if (tokens.size() != vertex_properties.size()) {
          reader.fail("vertex row has wrong value count");
        }
        Vec3 p;
        if (!parse_double(tokens[ix], p.x) || !parse_double(tokens[iy], p.y) ||
            !parse_double(tokens[iz], p.z)) {
          reader.fail("vertex coordinate is not a number");
        }
        points.push_back(p);
      }
    } else {
      for (std::size_t i = 0; i < e.count; ++i) {
        reader.require("element row");
      }
    }
  }
  return make_object_model(class_id, std::move(points));
}

// ---------------------------------------------------------------------------
// Scenes

inline std::string format_scene(const Scene& scene) {
  std::string out = "votepose-scene 1\n";
  out += "frame " + std::to_string(scene.frame_id) + "\n";
  out += "instances " + format_index(scene.instances.size()) + "\n";
  for (const SceneInstance& inst : scene.instances) {
    out += std::to_string(inst.class_id);
    out += ' ';
    out += format_index(inst.expected_points);
    out += ' ';
    out += format_pose(inst.gt_pose);
    out += '\n';
  }
  out += "points " + format_index(scene.points.size()) + "\n";
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    out += format_double(scene.points[i].x);
    out += ' ';
    out += format_double(scene.points[i].y);
    out += ' ';
    out += format_double(scene.points[i].z);
    out += ' ';
    out += std::to_string(scene.gt_class[i]);
    out += ' ';
    out += std::to_string(scene.gt_instance[i]);
    out += '\n';
  }
  return out;
}

inline void save_scene(const Scene& scene, const std::filesystem::path& path) {
  if (scene.points.size() != scene.gt_class.size() ||
      scene.points.size() != scene.gt_instance.size()) {
    throw InvalidArgument("scene label arrays disagree with point count");
  }
  write_file_atomic(path, format_scene(scene));
}

inline Scene load_scene(const std::filesystem::path& path) {
  detail::LineReader reader(read_file(path), path.string());

  auto tokens = detail::split_ws(reader.require("scene header"));
  if (tokens.size() != 2 || tokens[0] != "votepose-scene") {
    reader.fail("not a scene file (missing 'votepose-scene' magic)");
  }
  std::int64_t version = 0;
  if (!parse_int64(tokens[1], version)) reader.fail("malformed version");
  if (version != 1) {
    throw VersionError(path.string() + ": unknown scene version " +
                       std::to_string(version));
  }

  Scene scene;
  tokens = detail::split_ws(reader.require("frame line"));
  std::int64_t frame = 0;
  if (tokens.size() != 2 || tokens[0] != "frame" ||
      !parse_int64(tokens[1], frame)) {
    reader.fail("malformed frame line");
  }
  scene.frame_id = static_cast<int>(frame);

  tokens = detail::split_ws(reader.require("instances line"));
  std::uint64_t num_instances = 0;
  if (tokens.size() != 2 || tokens[0] != "instances" ||
      !parse_uint64(tokens[1], num_instances)) {
    reader.fail("malformed instances line");
  }
  for (std::uint64_t k = 0; k < num_instances; ++k) {
    tokens = detail::split_ws(reader.require("instance row"));
    if (tokens.size() != 14) reader.fail("instance row needs 14 values");
    SceneInstance inst;
    std::int64_t class_id = 0;
    std::uint64_t expected = 0;
    if (!parse_int64(tokens[0], class_id) ||
        !parse_uint64(tokens[1], expected)) {
      reader.fail("malformed instance ids");
    }
    inst.class_id = static_cast<int>(class_id);
    inst.expected_points = expected;
    double v[12];
    for (int i = 0; i < 12; ++i) {
      if (!parse_double(tokens[2 + i], v[i])) {
        reader.fail("malformed pose number");
      }
    }
    for (int i = 0; i < 9; ++i) inst.gt_pose.rotation.m[i] = v[i];
    inst.gt_pose.translation = {v[9], v[10], v[11]};
    scene.instances.push_back(inst);
  }

  tokens = detail::split_ws(reader.require("points line"));
  std::uint64_t num_points = 0;
  if (tokens.size() != 2 || tokens[0] != "points" ||
      !parse_uint64(tokens[1], num_points)) {
    reader.fail("malformed points line");
  }
  scene.points.reserve(num_points);
  for (std::uint64_t i = 0; i < num_points; ++i) {
    tokens = detail::split_ws(reader.require("point row"));
    if (tokens.size() != 5) reader.fail("point row needs 5 values");
    Vec3 p;
    std::int64_t cls = 0;
    std::int64_t inst = 0;
    if (!parse_double(tokens[0], p.x) || !parse_double(tokens[1], p.y) ||
        !parse_double(tokens[2], p.z) || !parse_int64(tokens[3], cls) ||
        !parse_int64(tokens[4], inst)) {
      reader.fail("malformed point row");
    }
    if (inst < -1 || inst >= static_cast<std::int64_t>(num_instances)) {
      reader.fail("point references an unknown instance");
    }
    scene.points.push_back(p);
    scene.gt_class.push_back(static_cast<int>(cls));
    scene.gt_instance.push_back(static_cast<int>(inst));
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Predictions

enum class PredictionFormat { json, binary };

inline std::string format_prediction_json(const Prediction& pred) {
  nlohmann::json j;
  j["version"] = 1;
  j["num_points"] = pred.num_points;
  j["num_keypoints"] = pred.num_keypoints;
  j["num_classes"] = pred.num_classes;
  auto flatten = [](const std::vector<Vec3>& v) {
    std::vector<double> flat;
    flat.reserve(v.size() * 3);
    for (const Vec3& p : v) {
      flat.push_back(p.x);
      flat.push_back(p.y);
      flat.push_back(p.z);
    }
    return flat;
  };
  j["kp_offsets"] = flatten(pred.kp_offsets);
  j["center_offsets"] = flatten(pred.center_offsets);
  j["class_scores"] = pred.class_scores;
  return j.dump();
}

namespace detail {

constexpr char kPredictionMagic[4] = {'V', 'P', 'P', 'B'};

template <typename T>
void append_raw(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T read_raw(const std::string& data, std::size_t& offset,
           const std::string& path) {
  if (offset + sizeof(T) > data.size()) {
    throw ParseError(path + ": truncated prediction file");
  }
  T value;
  std::memcpy(&value, data.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace detail

/// Binary layout, little-endian: "VPPB", uint32 version (= 1),
/// uint64 num_points, num_keypoints, num_classes, then float64 arrays
/// kp_offsets (num_points * num_keypoints * 3, point-major, x y z),
/// center_offsets (num_points * 3), class_scores (num_points * num_classes).
inline std::string format_prediction_binary(const Prediction& pred) {
  std::string out;
  out.append(detail::kPredictionMagic, 4);
  detail::append_raw<std::uint32_t>(out, 1);
  detail::append_raw<std::uint64_t>(out, pred.num_points);
  detail::append_raw<std::uint64_t>(out, pred.num_keypoints);
  detail::append_raw<std::uint64_t>(out, pred.num_classes);
  for (const Vec3& v : pred.kp_offsets) {
    detail::append_raw(out, v.x);
    detail::append_raw(out, v.y);
    detail::append_raw(out, v.z);
  }
  for (const Vec3& v : pred.center_offsets) {
    detail::append_raw(out, v.x);
    detail::append_raw(out, v.y);
    detail::append_raw(out, v.z);
  }
  for (double s : pred.class_scores) detail::append_raw(out, s);
  return out;
}

inline void save_prediction(const Prediction& pred,
                            const std::filesystem::path& path,
                            PredictionFormat format = PredictionFormat::json) {
  pred.validate();
  write_file_atomic(path, format == PredictionFormat::json
                              ? format_prediction_json(pred)
                              : format_prediction_binary(pred));
}

/// Loads either prediction format, sniffing JSON by a leading '{'.
inline Prediction load_prediction(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  Prediction pred;
  if (!data.empty() && data.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(data);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    try {
      const std::int64_t version = j.at("version").get<std::int64_t>();
      if (version != 1) {
        throw VersionError(path.string() + ": unknown prediction version " +
                           std::to_string(version));
      }
      pred.num_points = j.at("num_points").get<std::size_t>();
      pred.num_keypoints = j.at("num_keypoints").get<std::size_t>();
      pred.num_classes = j.at("num_classes").get<std::size_t>();
      const auto unflatten = [&](const nlohmann::json& arr,
                                 std::size_t expected) {
        std::vector<Vec3> out;
        if (!arr.is_array() || arr.size() != expected * 3) {
          throw ParseError(path.string() +
                           ": offset array length disagrees with header");
        }
        out.resize(expected);
        for (std::size_t i = 0; i < expected; ++i) {
          out[i] = Vec3{arr[3 * i].get<double>(), arr[3 * i + 1].get<double>(),
                        arr[3 * i + 2].get<double>()};
        }
        return out;
      };
      pred.kp_offsets = unflatten(j.at("kp_offsets"),
                                  pred.num_points * pred.num_keypoints);
      pred.center_offsets = unflatten(j.at("center_offsets"), pred.num_points);
      pred.class_scores =
          j.at("class_scores").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  } else {
    if (data.size() < 4 ||
        std::memcmp(data.data(), detail::kPredictionMagic, 4) != 0) {
      throw UnsupportedFormat(path.string() +
                              ": neither a JSON nor a binary prediction file");
    }
    std::size_t offset = 4;
    const auto version =
        detail::read_raw<std::uint32_t>(data, offset, path.string());
    if (version != 1) {
      throw VersionError(path.string() + ": unknown prediction version " +
                         std::to_string(version));
    }
    pred.num_points =
        detail::read_raw<std::uint64_t>(data, offset, path.string());
    pred.num_keypoints =
        detail::read_raw<std::uint64_t>(data, offset, path.string());
    pred.num_classes =
        detail::read_raw<std::uint64_t>(data, offset, path.string());
    const auto read_vecs = [&](std::size_t count) {
      std::vector<Vec3> out(count);
      for (Vec3& v : out) {
        v.x = detail::read_raw<double>(data, offset, path.string());
        v.y = detail::read_raw<double>(data, offset, path.string());
        v.z = detail::read_raw<double>(data, offset, path.string());
      }
      return out;
    };
    pred.kp_offsets = read_vecs(pred.num_points * pred.num_keypoints);
    pred.center_offsets = read_vecs(pred.num_points);
    pred.class_scores.resize(pred.num_points * pred.num_classes);
    for (double& s : pred.class_scores) {
      s = detail::read_raw<double>(data, offset, path.string());
    }
  }
  try {
    pred.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return pred;
}

// ---------------------------------------------------------------------------
// Keypoint files

struct KeypointFile {
  int class_id = 0;
  std::string method;  // "fps" or "bbox8"
  std::size_t m = 0;
  std::vector<Vec3> keypoints;
};

inline void save_keypoints(const KeypointFile& file,
                           const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["class_id"] = file.class_id;
  j["method"] = file.method;
  j["m"] = file.m;
  auto arr = nlohmann::json::array();
  for (const Vec3& k : file.keypoints) {
    arr.push_back(nlohmann::json::array({k.x, k.y, k.z}));
  }
  j["keypoints"] = std::move(arr);
  write_file_atomic(path, j.dump(2) + "\n");
}

inline KeypointFile load_keypoints(const std::filesystem::path& path) {
  KeypointFile file;
  try {
    const nlohmann::json j = nlohmann::json::parse(read_file(path));
    const std::int64_t version = j.at("version").get<std::int64_t>();
    if (version != 1) {
      throw VersionError(path.string() + ": unknown keypoints version " +
                         std::to_string(version));
    }
    file.class_id = j.at("class_id").get<int>();
    file.method = j.at("method").get<std::string>();
    file.m = j.at("m").get<std::size_t>();
    for (const auto& entry : j.at("keypoints")) {
      if (!entry.is_array() || entry.size() != 3) {
        throw ParseError(path.string() + ": keypoint entries must be [x,y,z]");
      }
      file.keypoints.push_back(Vec3{entry[0].get<double>(),
                                    entry[1].get<double>(),
                                    entry[2].get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return file;
}

// ---------------------------------------------------------------------------
// Registry directories

/// Loads a model registry from a directory holding registry.json:
///   {"version": 1, "models": [{"class_id": 1, "ply": "cube.ply",
///     "symmetric": false, "keypoints": "cube_kps.json",
///     "keypoint_method": "fps", "m": 8}, ...]}
/// Either a keypoints file or a selection method may be given; the
/// default is FPS with m = 8. Keypoints are normalized to the
/// center-first layout the pose stage expects.
inline ModelRegistry load_registry(const std::filesystem::path& dir) {
  const std::filesystem::path manifest = dir / "registry.json";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }

  ModelRegistry registry;
  try {
    const std::int64_t version = j.at("version").get<std::int64_t>();
    if (version != 1) {
      throw VersionError(manifest.string() + ": unknown registry version " +
                         std::to_string(version));
    }
    for (const auto& entry : j.at("models")) {
      const int class_id = entry.at("class_id").get<int>();
      ObjectModel model =
          load_ply(dir / entry.at("ply").get<std::string>(), class_id);
      if (entry.contains("keypoints")) {
        const KeypointFile kf =
            load_keypoints(dir / entry.at("keypoints").get<std::string>());
        if (kf.class_id != class_id) {
          throw InvalidArgument(manifest.string() +
                                ": keypoints file class id disagrees with "
                                "registry entry");
        }
        model.keypoints = kf.keypoints;
        if (model.keypoints.empty()) {
          throw InvalidArgument(manifest.string() + ": empty keypoints file");
        }
        if (model.keypoints.front() != model.center) {
          model.keypoints.insert(model.keypoints.begin(), model.center);
        }
      } else {
        const std::string method =
            entry.value("keypoint_method", std::string("fps"));
        const std::size_t m = entry.value("m", std::size_t{8});
        if (method == "fps") {
          model.keypoints = fps_select(model, m);
        } else if (method == "bbox8") {
          std::vector<Vec3> kps = bbox8_select(model);
          kps.insert(kps.begin(), model.center);
          model.keypoints = std::move(kps);
        } else {
          throw InvalidArgument(manifest.string() +
                                ": unknown keypoint_method '" + method + "'");
        }
      }
      registry.add(std::move(model), entry.value("symmetric", false));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  return registry;
}

// ---------------------------------------------------------------------------
// Result CSVs

inline std::string format_results_csv(std::vector<EvalRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const EvalRecord& a, const EvalRecord& b) {
                     if (a.frame_id != b.frame_id) {
                       return a.frame_id < b.frame_id;
                     }
                     return a.instance_id < b.instance_id;
                   });
  std::string out =
      "frame_id,class_id,instance_id,add,adds,symmetric,invisible_fraction\n";
  for (const EvalRecord& r : records) {
    out += std::to_string(r.frame_id);
    out += ',';
    out += std::to_string(r.class_id);
    out += ',';
    out += std::to_string(r.instance_id);
    out += ',';
    out += format_double(r.add);
    out += ',';
    out += format_double(r.adds);
    out += ',';
    out += r.symmetric ? '1' : '0';
    out += ',';
    out += format_double(r.invisible_fraction);
    out += '\n';
  }
  return out;
}

inline void save_results(const std::vector<EvalRecord>& records,
                         const std::filesystem::path& path) {
  write_file_atomic(path, format_results_csv(records));
}

inline std::vector<EvalRecord> load_results(
    const std::filesystem::path& path) {
  detail::LineReader reader(read_file(path), path.string());
  std::string_view line = reader.require("results header");
  if (line !=
      "frame_id,class_id,instance_id,add,adds,symmetric,invisible_fraction") {
    reader.fail("unexpected results CSV header");
  }
  std::vector<EvalRecord> records;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = detail::split_char(line, ',');
    if (f.size() != 7) reader.fail("results row needs 7 fields");
    EvalRecord r;
    std::int64_t frame = 0, cls = 0, inst = 0, sym = 0;
    if (!parse_int64(f[0], frame) || !parse_int64(f[1], cls) ||
        !parse_int64(f[2], inst) || !parse_double(f[3], r.add) ||
        !parse_double(f[4], r.adds) || !parse_int64(f[5], sym) ||
        !parse_double(f[6], r.invisible_fraction)) {
      reader.fail("malformed results row");
    }
    r.frame_id = static_cast<int>(frame);
    r.class_id = static_cast<int>(cls);
    r.instance_id = static_cast<int>(inst);
    r.symmetric = sym != 0;
    records.push_back(r);
  }
  return records;
}

/// Accuracy-vs-threshold curve: `steps` evenly spaced thresholds up to
/// max_threshold, one "threshold,accuracy" row each, then a final
/// "auc,<exact closed-form value>" summary row.
inline std::string format_curve_csv(const std::vector<double>& distances,
                                    double max_threshold = 0.1,
                                    int steps = 100) {
  if (steps < 1) throw InvalidArgument("curve needs >= 1 step");
  std::string out = "threshold,accuracy\n";
  for (int k = 1; k <= steps; ++k) {
    const double t = max_threshold * static_cast<double>(k) /
                     static_cast<double>(steps);
    out += format_double(t);
    out += ',';
    out += format_double(accuracy_at(distances, t));
    out += '\n';
  }
  out += "auc," + format_double(auc(distances, max_threshold)) + "\n";
  return out;
}

inline std::string format_occlusion_csv(
    const std::vector<OcclusionSweepRow>& rows) {
  std::string out = "fraction,trials,acc_2cm,mean_add,mean_adds\n";
  for (const OcclusionSweepRow& r : rows) {
    out += format_double(r.fraction);
    out += ',';
    out += std::to_string(r.trials);
    out += ',';
    out += format_double(r.acc);
    out += ',';
    out += format_double(r.mean_add);
    out += ',';
    out += format_double(r.mean_adds);
    out += '\n';
  }
  return out;
}

inline std::string format_ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "method,trials,mean_add,acc_2cm\n";
  for (const AblationRow& r : rows) {
    out += keypoint_method_name(r.method);
    out += ',';
    out += std::to_string(r.trials);
    out += ',';
    out += format_double(r.mean_add);
    out += ',';
    out += format_double(r.acc);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimate CSVs (pipeline output poses)

inline std::string format_estimates_csv(
    int frame_id, const std::vector<InstanceResult>& results) {
  std::string out =
      "frame_id,class_id,gt_instance,status,cluster_size,"
      "r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz\n";
  for (const InstanceResult& res : results) {
    out += std::to_string(frame_id);
    out += ',';
    out += std::to_string(res.class_id);
    out += ',';
    out += std::to_string(res.majority_gt_instance);
    out += ',';
    out += res.failed ? "failed" : "ok";
    out += ',';
    out += format_index(res.cluster_size);
    for (int i = 0; i < 9; ++i) {
      out += ',';
      out += format_double(res.pose.rotation.m[i]);
    }
    out += ',';
    out += format_double(res.pose.translation.x);
    out += ',';
    out += format_double(res.pose.translation.y);
    out += ',';
    out += format_double(res.pose.translation.z);
    out += '\n';
  }
  return out;
}

inline void save_estimates(int frame_id,
                           const std::vector<InstanceResult>& results,
                           const std::filesystem::path& path) {
  write_file_atomic(path, format_estimates_csv(frame_id, results));
}

struct EstimateRow {
  int frame_id = 0;
  InstanceResult result;
};

inline std::vector<EstimateRow> load_estimates(
    const std::filesystem::path& path) {
  detail::LineReader reader(read_file(path), path.string());
  std::string_view line = reader.require("estimates header");
  if (line !=
      "frame_id,class_id,gt_instance,status,cluster_size,"
      "r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz") {
    reader.fail("unexpected estimates CSV header");
  }
  std::vector<EstimateRow> rows;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = detail::split_char(line, ',');
    if (f.size() != 17) reader.fail("estimate row needs 17 fields");
    EstimateRow row;
    std::int64_t frame = 0, cls = 0, inst = 0;
    std::uint64_t size = 0;
    if (!parse_int64(f[0], frame) || !parse_int64(f[1], cls) ||
        !parse_int64(f[2], inst) || !parse_uint64(f[4], size)) {
      reader.fail("malformed estimate row");
    }
    if (f[3] == "ok") {
      row.result.failed = false;
    } else if (f[3] == "failed") {
      row.result.failed = true;
    } else {
      reader.fail("estimate status must be ok or failed");
    }
    row.frame_id = static_cast<int>(frame);
    row.result.class_id = static_cast<int>(cls);
    row.result.majority_gt_instance = static_cast<int>(inst);
    row.result.cluster_size = size;
    double v[12];
    for (int i = 0; i < 12; ++i) {
      if (!parse_double(f[5 + i], v[i])) reader.fail("malformed pose number");
    }
    for (int i = 0; i < 9; ++i) row.result.pose.rotation.m[i] = v[i];
    row.result.pose.translation = {v[9], v[10], v[11]};
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace votepose
