#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gncpose/metrics.hpp"
#include "gncpose/types.hpp"

namespace gncpose {

using json = nlohmann::json;

/// Parsed correspondence file. "truth" is an optional extension key holding a
/// pose in the same layout as solve output; it enables metrics on replay.
struct CorrespondenceFile {
  CameraIntrinsics intrinsics;
  CorrespondenceSet correspondences;
  std::optional<Pose> truth;
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& where, const std::string& what) {
  fail(ErrorKind::ParseError, where + ": " + what);
}

inline double json_number(const json& j, const std::string& where) {
  if (!j.is_number()) parse_fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) parse_fail(where, "expected a finite number");
  return v;
}

inline const json& json_field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) parse_fail(where, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) parse_fail(where, "missing field \"" + key + "\"");
  return *it;
}

template <int N>
Eigen::Matrix<double, N, 1> json_vector(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N))
    parse_fail(where, "expected an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = json_number(j[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
  return v;
}

inline int json_int(const json& j, const std::string& where) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) parse_fail(where, "expected an integer");
  return j.get<int>();
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::ParseError, path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::ParseError, path + ": cannot open file for writing");
  out << text;
  if (!out) fail(ErrorKind::ParseError, path + ": write failed");
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace detail

inline json pose_to_json(const Pose& pose) {
  json rotation = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rotation.push_back(pose.rotation(r, c));
  return json{{"rotation", rotation},
              {"translation", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

/// Rotation is 9 numbers, row-major. The rotation must be orthonormal with det +1 to 1e-6.
inline Pose pose_from_json(const json& j, const std::string& where = "pose") {
  const json& rot = detail::json_field(j, "rotation", where);
  if (!rot.is_array() || rot.size() != 9) detail::parse_fail(where + ".rotation", "expected an array of 9 numbers");
  Pose p;
  for (int i = 0; i < 9; ++i)
    p.rotation(i / 3, i % 3) = detail::json_number(rot[static_cast<std::size_t>(i)], where + ".rotation[" + std::to_string(i) + "]");
  p.translation = detail::json_vector<3>(detail::json_field(j, "translation", where), where + ".translation");
  if (!p.is_valid(1e-6)) detail::parse_fail(where + ".rotation", "not a proper rotation matrix");
  return p;
}

inline json intrinsics_to_json(const CameraIntrinsics& k) {
  return json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.image_width}, {"height", k.image_height}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j, const std::string& where = "intrinsics") {
  CameraIntrinsics k;
  k.fx = detail::json_number(detail::json_field(j, "fx", where), where + ".fx");
  k.fy = detail::json_number(detail::json_field(j, "fy", where), where + ".fy");
  k.cx = detail::json_number(detail::json_field(j, "cx", where), where + ".cx");
  k.cy = detail::json_number(detail::json_field(j, "cy", where), where + ".cy");
  k.image_width = detail::json_int(detail::json_field(j, "width", where), where + ".width");
  k.image_height = detail::json_int(detail::json_field(j, "height", where), where + ".height");
  return validate_intrinsics(k);
}

inline json correspondences_to_json(const CameraIntrinsics& k, const CorrespondenceSet& c,
                                    const std::optional<Pose>& truth = std::nullopt) {
  json items = json::array();
  for (const auto& item : c) {
    json e{{"pixel", {item.pixel.x(), item.pixel.y()}},
           {"point", {item.point.x(), item.point.y(), item.point.z()}}};
    if (item.geom_weight) e["geom_weight"] = *item.geom_weight;
    items.push_back(std::move(e));
  }
  json out{{"intrinsics", intrinsics_to_json(k)}, {"correspondences", std::move(items)}};
  if (truth) out["truth"] = pose_to_json(*truth);
  return out;
}

inline CorrespondenceFile correspondences_from_json(const json& root) {
  CorrespondenceFile out;
  out.intrinsics = intrinsics_from_json(detail::json_field(root, "intrinsics", "root"));
  const json& items = detail::json_field(root, "correspondences", "root");
  if (!items.is_array()) detail::parse_fail("correspondences", "expected an array");
  out.correspondences.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string where = "correspondences[" + std::to_string(i) + "]";
    Correspondence item;
    item.pixel = detail::json_vector<2>(detail::json_field(items[i], "pixel", where), where + ".pixel");
    item.point = detail::json_vector<3>(detail::json_field(items[i], "point", where), where + ".point");
    if (const auto it = items[i].find("geom_weight"); it != items[i].end()) {
      const double w = detail::json_number(*it, where + ".geom_weight");
      if (w < 0.0 || w > 1.0) detail::parse_fail(where + ".geom_weight", "must lie in [0, 1]");
      item.geom_weight = w;
    }
    out.correspondences.push_back(item);
  }
  if (const auto it = root.find("truth"); it != root.end()) out.truth = pose_from_json(*it, "truth");
  return out;
}

/// Parse errors report the source name and line number.
inline json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ParseError, source + ":" + std::to_string(detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                                    ": invalid JSON (" + e.what() + ")");
  }
}

inline CorrespondenceFile load_correspondences(const std::string& path) {
  const json root = parse_json_text(detail::read_text(path), path);
  try {
    return correspondences_from_json(root);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ParseError) throw;
    fail(ErrorKind::ParseError, path + ": " + e.detail());
  }
}

inline void save_correspondences(const std::string& path, const CameraIntrinsics& k, const CorrespondenceSet& c,
                                 const std::optional<Pose>& truth = std::nullopt) {
  detail::write_text(path, correspondences_to_json(k, c, truth).dump(2) + "\n");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& token, double& out) {
  const std::string t = trim(token);
  if (t.empty()) return false;
  std::istringstream ss(t);
  ss >> out;
  return !ss.fail() && ss.eof() && std::isfinite(out);
}

inline std::vector<Vec3> parse_ply(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto where = [&] { return source + ":" + std::to_string(lineno); };

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
  };
  std::vector<Element> elements;
  bool ascii = false;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(trim(line));
    std::string word;
    ls >> word;
    if (lineno == 1) {
      if (word != "ply") fail(ErrorKind::ParseError, where() + ": missing ply magic");
      continue;
    }
    if (word == "format") {
      std::string kind;
      ls >> kind;
      if (kind != "ascii") fail(ErrorKind::ParseError, where() + ": unsupported PLY format \"" + kind + "\" (ASCII only)");
      ascii = true;
    } else if (word == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (ls.fail() || count < 0) fail(ErrorKind::ParseError, where() + ": malformed element line");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) fail(ErrorKind::ParseError, where() + ": property before any element");
      std::string type, name;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type;
      }
      ls >> name;
      elements.back().properties.push_back(name);
    } else if (word == "end_header") {
      header_done = true;
      break;
    } else if (word != "comment" && word != "obj_info" && !word.empty()) {
      fail(ErrorKind::ParseError, where() + ": unexpected header keyword \"" + word + "\"");
    }
  }
  if (!ascii) fail(ErrorKind::ParseError, source + ": missing format line");
  if (!header_done) fail(ErrorKind::ParseError, source + ": missing end_header");

  std::vector<Vec3> vertices;
  bool saw_vertex = false;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t i = 0; i < e.count; ++i) {
        ++lineno;
        if (!std::getline(in, line)) fail(ErrorKind::ParseError, where() + ": unexpected end of file");
      }
      continue;
    }
    saw_vertex = true;
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t p = 0; p < e.properties.size(); ++p) {
      if (e.properties[p] == "x") ix = static_cast<int>(p);
      if (e.properties[p] == "y") iy = static_cast<int>(p);
      if (e.properties[p] == "z") iz = static_cast<int>(p);
    }
    if (ix < 0 || iy < 0 || iz < 0) fail(ErrorKind::ParseError, source + ": vertex element lacks x, y or z");
    vertices.reserve(e.count);
    for (std::size_t i = 0; i < e.count; ++i) {
      ++lineno;
      if (!std::getline(in, line)) fail(ErrorKind::ParseError, where() + ": unexpected end of file");
      std::istringstream ls(line);
      std::vector<std::string> tokens;
      for (std::string t; ls >> t;) tokens.push_back(t);
      if (tokens.size() < e.properties.size()) fail(ErrorKind::ParseError, where() + ": too few vertex values");
      Vec3 v;
      const int idx[3] = {ix, iy, iz};
      for (int a = 0; a < 3; ++a)
        if (!parse_double(tokens[static_cast<std::size_t>(idx[a])], v(a)))
          fail(ErrorKind::ParseError, where() + ": invalid number \"" + tokens[static_cast<std::size_t>(idx[a])] + "\"");
      vertices.push_back(v);
    }
  }
  if (!saw_vertex) fail(ErrorKind::ParseError, source + ": no vertex element");
  return vertices;
}

/// One "x,y,z" per line. Blank lines and lines starting with '#' are skipped;
/// a non-numeric first data line is taken as a header.
inline std::vector<Vec3> parse_csv_points(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  std::vector<Vec3> vertices;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> fields;
    std::istringstream ls(t);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    Vec3 v;
    bool ok = fields.size() == 3;
    for (int a = 0; ok && a < 3; ++a) ok = parse_double(fields[static_cast<std::size_t>(a)], v(a));
    if (!ok) {
      if (first) {
        first = false;
        continue;
      }
      fail(ErrorKind::ParseError, source + ":" + std::to_string(lineno) + ": expected three comma-separated numbers");
    }
    first = false;
    vertices.push_back(v);
  }
  return vertices;
}

}  // namespace detail

/// ASCII PLY (detected by the "ply" magic) or CSV. Binary PLY is rejected.
inline ModelPoints load_model_points(const std::string& path) {
  const std::string text = detail::read_text(path);
  const bool is_ply = text.rfind("ply", 0) == 0;
  std::vector<Vec3> vertices = is_ply ? detail::parse_ply(text, path) : detail::parse_csv_points(text, path);
  if (vertices.empty()) fail(ErrorKind::EmptyModel, path + ": no vertices");
  return make_model_points(std::move(vertices));
}

}  // namespace gncpose
