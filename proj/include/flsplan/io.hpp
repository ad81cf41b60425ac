#pragma once

// File formats: xyz-text and ascii PLY clouds, PLY/OFF meshes, scene
// manifests, metrics reports, encodings and plot series.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "flsplan/conflict.hpp"
#include "flsplan/model.hpp"

namespace flsplan::io {

using Json = nlohmann::ordered_json;

/// Malformed input. `line` is 1-based, 0 when not tied to a line.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Unreadable or unwritable file.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class CloudFormat { XyzText, PlyAscii };

inline CloudFormat format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".ply" ? CloudFormat::PlyAscii : CloudFormat::XyzText;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline int parse_coord(std::string_view s, const std::string& source, std::size_t line) {
  if (auto v = parse_number<int>(s)) return *v;
  // Accept integral values written as reals, e.g. "3.0".
  if (auto d = parse_number<double>(s); d && std::floor(*d) == *d && std::abs(*d) < 1e9) {
    return static_cast<int>(*d);
  }
  throw ParseError(source, line, "expected an integer coordinate, got '" + std::string(s) + "'");
}

inline std::uint8_t parse_channel(std::string_view s, const std::string& source, std::size_t line) {
  const auto v = parse_number<int>(s);
  if (!v || *v < 0 || *v > 255) {
    throw ParseError(source, line, "color channel must be an integer in 0..255, got '" +
                                       std::string(s) + "'");
  }
  return static_cast<std::uint8_t>(*v);
}

inline std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

/// Builds the cloud, reporting a duplicate with the line it appeared on.
inline PointCloud make_cloud(std::vector<Point> points, const std::vector<std::size_t>& lines,
                             const std::string& source) {
  if (points.empty()) throw ParseError(source, 0, "no points");
  std::unordered_set<Cell, CellHash> seen;
  seen.reserve(points.size() * 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!seen.insert(points[i].cell).second) {
      throw ParseError(source, lines[i], "duplicate point coordinate " + to_string(points[i].cell));
    }
  }
  return PointCloud(std::move(points));
}

}  // namespace detail

/// One point per line: "x y z" or "x y z r g b". '#' starts a comment.
inline PointCloud parse_xyz(std::istream& in, const std::string& source = "<xyz>") {
  std::vector<Point> points;
  std::vector<std::size_t> lines;
  std::string raw;
  std::size_t n = 0;
  while (std::getline(in, raw)) {
    ++n;
    const std::string line = detail::strip_comment(raw);
    const auto f = detail::split_ws(line);
    if (f.empty()) continue;
    if (f.size() != 3 && f.size() != 6) {
      throw ParseError(source, n, "expected 3 or 6 fields, got " + std::to_string(f.size()));
    }
    Point p;
    p.cell = {detail::parse_coord(f[0], source, n), detail::parse_coord(f[1], source, n),
              detail::parse_coord(f[2], source, n)};
    if (f.size() == 6) {
      p.color = {detail::parse_channel(f[3], source, n), detail::parse_channel(f[4], source, n),
                 detail::parse_channel(f[5], source, n)};
    }
    points.push_back(p);
    lines.push_back(n);
  }
  return detail::make_cloud(std::move(points), lines, source);
}

namespace detail {

struct PlyElement {
  std::string name;
  std::size_t count{0};
  std::vector<std::string> properties;  ///< scalar property names; list properties as "list:<name>"
  std::size_t header_line{0};
};

struct PlyHeader {
  std::vector<PlyElement> elements;
  std::size_t lines{0};  ///< header length in lines, including end_header
};

inline PlyHeader read_ply_header(std::istream& in, const std::string& source) {
  PlyHeader h;
  std::string line;
  if (!std::getline(in, line) || split_ws(line) != std::vector<std::string_view>{"ply"}) {
    throw ParseError(source, 1, "missing 'ply' magic");
  }
  h.lines = 1;
  bool format_seen = false;
  while (std::getline(in, line)) {
    ++h.lines;
    const auto f = split_ws(line);
    if (f.empty() || f[0] == "comment" || f[0] == "obj_info") continue;
    if (f[0] == "format") {
      if (f.size() < 2 || f[1] != "ascii") throw ParseError(source, h.lines, "only ascii PLY is supported");
      format_seen = true;
    } else if (f[0] == "element") {
      if (f.size() != 3) throw ParseError(source, h.lines, "malformed element line");
      const auto count = parse_number<std::size_t>(f[2]);
      if (!count) throw ParseError(source, h.lines, "element count must be a non-negative integer");
      h.elements.push_back(PlyElement{std::string(f[1]), *count, {}, h.lines});
    } else if (f[0] == "property") {
      if (h.elements.empty()) throw ParseError(source, h.lines, "property before any element");
      if (f.size() == 5 && f[1] == "list") {
        h.elements.back().properties.push_back("list:" + std::string(f[4]));
      } else if (f.size() == 3) {
        h.elements.back().properties.emplace_back(f[2]);
      } else {
        throw ParseError(source, h.lines, "malformed property line");
      }
    } else if (f[0] == "end_header") {
      if (!format_seen) throw ParseError(source, h.lines, "missing format line");
      return h;
    } else {
      throw ParseError(source, h.lines, "unknown header keyword '" + std::string(f[0]) + "'");
    }
  }
  throw ParseError(source, h.lines, "missing end_header");
}

/// Reads the body element by element, calling on_row(element, fields, line)
/// for each row. Checks that the body holds exactly the declared rows.
template <class OnRow>
void read_ply_body(std::istream& in, const PlyHeader& h, const std::string& source, OnRow&& on_row) {
  std::size_t n = h.lines;
  std::string line;
  for (const auto& e : h.elements) {
    for (std::size_t row = 0; row < e.count;) {
      if (!std::getline(in, line)) {
        throw ParseError(source, n, "element '" + e.name + "' declares " + std::to_string(e.count) +
                                        " rows but the file ends after " + std::to_string(row));
      }
      ++n;
      const auto f = split_ws(line);
      if (f.empty()) continue;
      on_row(e, f, n);
      ++row;
    }
  }
  while (std::getline(in, line)) {
    ++n;
    if (!split_ws(line).empty()) {
      throw ParseError(source, n, "more rows than the header declares");
    }
  }
}

inline std::ptrdiff_t index_of(const PlyElement& e, std::string_view name) {
  const auto it = std::find(e.properties.begin(), e.properties.end(), name);
  return it == e.properties.end() ? -1 : it - e.properties.begin();
}

}  // namespace detail

/// Ascii PLY with a "vertex" element carrying x, y, z and optionally
/// red, green, blue. Other elements are skipped.
inline PointCloud parse_ply(std::istream& in, const std::string& source = "<ply>") {
  const auto header = detail::read_ply_header(in, source);
  std::vector<Point> points;
  std::vector<std::size_t> lines;
  bool has_vertex = false;
  for (const auto& e : header.elements) {
    if (e.name != "vertex") continue;
    has_vertex = true;
    for (const char* axis : {"x", "y", "z"}) {
      if (detail::index_of(e, axis) < 0) {
        throw ParseError(source, e.header_line, std::string("vertex element lacks property ") + axis);
      }
    }
  }
  if (!has_vertex) throw ParseError(source, 0, "no vertex element");

  detail::read_ply_body(in, header, source, [&](const detail::PlyElement& e, const auto& f,
                                                std::size_t line) {
    if (e.name != "vertex") return;
    if (f.size() != e.properties.size()) {
      throw ParseError(source, line, "expected " + std::to_string(e.properties.size()) +
                                         " values, got " + std::to_string(f.size()));
    }
    const auto at = [&](std::string_view name) { return f[static_cast<std::size_t>(detail::index_of(e, name))]; };
    Point p;
    p.cell = {detail::parse_coord(at("x"), source, line), detail::parse_coord(at("y"), source, line),
              detail::parse_coord(at("z"), source, line)};
    if (detail::index_of(e, "red") >= 0 && detail::index_of(e, "green") >= 0 &&
        detail::index_of(e, "blue") >= 0) {
      p.color = {detail::parse_channel(at("red"), source, line),
                 detail::parse_channel(at("green"), source, line),
                 detail::parse_channel(at("blue"), source, line)};
    }
    points.push_back(p);
    lines.push_back(line);
  });
  return detail::make_cloud(std::move(points), lines, source);
}

inline PointCloud load_cloud(const std::filesystem::path& path,
                             std::optional<CloudFormat> format = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const CloudFormat fmt = format.value_or(format_for(path));
  return fmt == CloudFormat::PlyAscii ? parse_ply(in, path.string()) : parse_xyz(in, path.string());
}

inline void write_xyz(std::ostream& out, const PointCloud& cloud) {
  for (const auto& p : cloud) {
    out << p.cell.x << ' ' << p.cell.y << ' ' << p.cell.z << ' ' << int{p.color.r} << ' '
        << int{p.color.g} << ' ' << int{p.color.b} << '\n';
  }
}

inline void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty int x\nproperty int y\nproperty int z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  write_xyz(out, cloud);
}

inline void write_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                        std::optional<CloudFormat> format = std::nullopt) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  if (format.value_or(format_for(path)) == CloudFormat::PlyAscii) {
    write_ply(out, cloud);
  } else {
    write_xyz(out, cloud);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Meshes

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;  ///< polygons fan-triangulated
};

namespace detail {

inline void add_polygon(Mesh& mesh, const std::vector<std::size_t>& poly, const std::string& source,
                        std::size_t line) {
  if (poly.size() < 3) throw ParseError(source, line, "face needs at least 3 vertices");
  for (const std::size_t v : poly) {
    if (v >= mesh.vertices.size()) throw ParseError(source, line, "face references missing vertex");
  }
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
    mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
  }
}

inline double parse_real(std::string_view s, const std::string& source, std::size_t line) {
  if (auto v = parse_number<double>(s)) return *v;
  throw ParseError(source, line, "expected a number, got '" + std::string(s) + "'");
}

inline std::size_t parse_index(std::string_view s, const std::string& source, std::size_t line) {
  if (auto v = parse_number<std::size_t>(s)) return *v;
  throw ParseError(source, line, "expected a vertex index, got '" + std::string(s) + "'");
}

}  // namespace detail

/// Object File Format: "OFF", then "nv nf ne", vertices, faces.
inline Mesh parse_off(std::istream& in, const std::string& source = "<off>") {
  Mesh mesh;
  std::string raw;
  std::size_t n = 0;
  std::string keep;
  const auto next = [&]() -> std::vector<std::string_view> {
    while (std::getline(in, raw)) {
      ++n;
      keep = detail::strip_comment(raw);
      auto f = detail::split_ws(keep);
      if (!f.empty()) return f;
    }
    return {};
  };
  auto f = next();
  if (f.empty() || f[0] != "OFF") throw ParseError(source, n, "missing 'OFF' magic");
  f = std::vector<std::string_view>(f.begin() + 1, f.end());
  if (f.empty()) f = next();
  if (f.size() < 2) throw ParseError(source, n, "expected vertex and face counts");
  const std::size_t nv = detail::parse_index(f[0], source, n);
  const std::size_t nf = detail::parse_index(f[1], source, n);
  for (std::size_t i = 0; i < nv; ++i) {
    f = next();
    if (f.size() < 3) throw ParseError(source, n, "vertex needs 3 coordinates");
    mesh.vertices.push_back({detail::parse_real(f[0], source, n), detail::parse_real(f[1], source, n),
                             detail::parse_real(f[2], source, n)});
  }
  for (std::size_t i = 0; i < nf; ++i) {
    f = next();
    if (f.empty()) throw ParseError(source, n, "file ends before all faces");
    const std::size_t k = detail::parse_index(f[0], source, n);
    if (f.size() < k + 1) throw ParseError(source, n, "face lists fewer vertices than it declares");
    std::vector<std::size_t> poly;
    for (std::size_t j = 0; j < k; ++j) poly.push_back(detail::parse_index(f[j + 1], source, n));
    detail::add_polygon(mesh, poly, source, n);
  }
  return mesh;
}

/// Ascii PLY mesh with "vertex" (x, y, z) and "face" (vertex index list).
inline Mesh parse_ply_mesh(std::istream& in, const std::string& source = "<ply>") {
  const auto header = detail::read_ply_header(in, source);
  Mesh mesh;
  detail::read_ply_body(in, header, source, [&](const detail::PlyElement& e, const auto& f,
                                                std::size_t line) {
    if (e.name == "vertex") {
      const auto ix = detail::index_of(e, "x");
      const auto iy = detail::index_of(e, "y");
      const auto iz = detail::index_of(e, "z");
      if (ix < 0 || iy < 0 || iz < 0) throw ParseError(source, line, "vertex lacks x, y or z");
      if (f.size() < e.properties.size()) throw ParseError(source, line, "short vertex row");
      mesh.vertices.push_back({detail::parse_real(f[static_cast<std::size_t>(ix)], source, line),
                               detail::parse_real(f[static_cast<std::size_t>(iy)], source, line),
                               detail::parse_real(f[static_cast<std::size_t>(iz)], source, line)});
    } else if (e.name == "face") {
      const std::size_t k = detail::parse_index(f[0], source, line);
      if (f.size() < k + 1) throw ParseError(source, line, "face lists fewer vertices than it declares");
      std::vector<std::size_t> poly;
      for (std::size_t j = 0; j < k; ++j) poly.push_back(detail::parse_index(f[j + 1], source, line));
      detail::add_polygon(mesh, poly, source, line);
    }
  });
  return mesh;
}

inline Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return parse_off(in, path.string());
  if (ext == ".ply") return parse_ply_mesh(in, path.string());
  throw ValidationError("unknown mesh format '" + ext + "' (expected .off or .ply)");
}

/// Scales the mesh's bounding box uniformly to fit `dims` and floors each
/// position to a cell (coordinates at the far face clamp to the last cell).
/// Vertices always become points; when there are fewer than `density`
/// vertices, density - |V| extra points are drawn uniformly over the surface
/// (area-weighted triangle choice, uniform barycentric). Points landing in
/// the same cell merge, first one wins.
inline PointCloud sample_mesh_to_cloud(const Mesh& mesh, const Dims& dims, std::size_t density = 0,
                                       std::uint64_t seed = 0) {
  if (mesh.triangles.empty()) throw ValidationError("mesh has no faces");
  Vec3 lo = mesh.vertices.front();
  Vec3 hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
  }
  const std::array<double, 3> extent{hi.x - lo.x, hi.y - lo.y, hi.z - lo.z};
  double scale = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < 3; ++a) {
    if (extent[a] > 0.0) scale = std::min(scale, dims.extent(a) / extent[a]);
  }
  if (!std::isfinite(scale)) scale = 1.0;  // all vertices coincide

  const auto quantize = [&](const Vec3& v) {
    const std::array<double, 3> rel{v.x - lo.x, v.y - lo.y, v.z - lo.z};
    std::array<int, 3> c{};
    for (std::size_t a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<int>(std::floor(rel[a] * scale)), 0, dims.extent(a) - 1);
    }
    return Cell{c[0], c[1], c[2]};
  };

  std::vector<Point> points;
  std::unordered_set<Cell, CellHash> seen;
  const auto add = [&](const Vec3& v) {
    const Cell c = quantize(v);
    if (seen.insert(c).second) points.push_back(Point{c, kWhite});
  };
  for (const auto& v : mesh.vertices) add(v);

  if (density > mesh.vertices.size()) {
    std::vector<double> areas;
    areas.reserve(mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
      const Vec3 u = mesh.vertices[t[1]] - mesh.vertices[t[0]];
      const Vec3 w = mesh.vertices[t[2]] - mesh.vertices[t[0]];
      const Vec3 cross{u.y * w.z - u.z * w.y, u.z * w.x - u.x * w.z, u.x * w.y - u.y * w.x};
      areas.push_back(0.5 * cross.norm());
    }
    std::mt19937_64 rng(seed);
    const bool degenerate = std::all_of(areas.begin(), areas.end(), [](double a) { return a == 0.0; });
    std::discrete_distribution<std::size_t> pick = degenerate
        ? std::discrete_distribution<std::size_t>(areas.size(), 0.0, 1.0, [](double) { return 1.0; })
        : std::discrete_distribution<std::size_t>(areas.begin(), areas.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t k = mesh.vertices.size(); k < density; ++k) {
      const auto& t = mesh.triangles[pick(rng)];
      double r1 = unit(rng);
      double r2 = unit(rng);
      if (r1 + r2 > 1.0) {
        r1 = 1.0 - r1;
        r2 = 1.0 - r2;
      }
      const Vec3& a = mesh.vertices[t[0]];
      add(a + (mesh.vertices[t[1]] - a) * r1 + (mesh.vertices[t[2]] - a) * r2);
    }
  }
  return PointCloud(std::move(points));
}

// ---------------------------------------------------------------------------
// Scene manifest

struct SceneManifest {
  std::vector<std::filesystem::path> clouds;  ///< resolved against the manifest's directory
  double frame_rate{1.0};
  std::optional<std::size_t> gpc_size;
};

/// {"clouds": [paths...], "frame_rate": r, "gpc_size": omega?}
inline SceneManifest parse_manifest(const std::string& text, const std::filesystem::path& base,
                                    const std::string& source = "<manifest>") {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(source, 0, e.what());
  }
  if (!doc.is_object()) throw ParseError(source, 0, "manifest must be a JSON object");
  SceneManifest m;
  if (!doc.contains("clouds") || !doc["clouds"].is_array() || doc["clouds"].empty()) {
    throw ParseError(source, 0, "\"clouds\" must be a non-empty array of paths");
  }
  for (const auto& p : doc["clouds"]) {
    if (!p.is_string()) throw ParseError(source, 0, "cloud paths must be strings");
    std::filesystem::path path = p.get<std::string>();
    if (path.is_relative()) path = base / path;
    if (!std::filesystem::exists(path)) throw ParseError(source, 0, "missing cloud file " + path.string());
    m.clouds.push_back(path);
  }
  if (doc.contains("frame_rate")) {
    if (!doc["frame_rate"].is_number() || !(doc["frame_rate"].get<double>() > 0.0)) {
      throw ParseError(source, 0, "\"frame_rate\" must be a positive number");
    }
    m.frame_rate = doc["frame_rate"].get<double>();
  }
  if (doc.contains("gpc_size") && !doc["gpc_size"].is_null()) {
    if (!doc["gpc_size"].is_number_unsigned() || doc["gpc_size"].get<std::size_t>() == 0) {
      throw ParseError(source, 0, "\"gpc_size\" must be a positive integer");
    }
    m.gpc_size = doc["gpc_size"].get<std::size_t>();
  }
  return m;
}

inline SceneManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str(), path.parent_path(), path.string());
}

inline Scene load_scene(const SceneManifest& manifest) {
  Scene scene;
  scene.frame_rate = manifest.frame_rate;
  for (const auto& p : manifest.clouds) scene.clouds.push_back(load_cloud(p));
  return scene;
}

/// Writes each cloud as cloud_NNN.xyz next to a manifest.json in `dir`.
inline std::filesystem::path write_scene(const std::filesystem::path& dir, const Scene& scene,
                                         std::optional<std::size_t> gpc_size = std::nullopt) {
  std::filesystem::create_directories(dir);
  Json doc;
  doc["clouds"] = Json::array();
  for (std::size_t i = 0; i < scene.clouds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "cloud_%03zu.xyz", i);
    write_cloud(dir / name, scene.clouds[i]);
    doc["clouds"].push_back(name);
  }
  doc["frame_rate"] = scene.frame_rate;
  if (gpc_size) doc["gpc_size"] = *gpc_size;
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  return path;
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricsReport {
  std::string algorithm;
  double latency_seconds{0.0};
  double total_distance_cells{0.0};
  std::size_t intersecting_paths{0};
  std::size_t conflicts{0};
  double execution_time_ms{0.0};
  std::vector<std::size_t> dispatcher_counts;
  std::size_t quota_resets{0};

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline constexpr std::string_view kMetricsHeader =
    "latency_seconds,total_distance_cells,intersecting_paths,conflicts,execution_time_ms,"
    "dispatcher_counts,quota_resets,algorithm";

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsReport>& reports) {
  out << kMetricsHeader << '\n';
  for (const auto& r : reports) {
    out << format_number(r.latency_seconds) << ',' << format_number(r.total_distance_cells) << ','
        << r.intersecting_paths << ',' << r.conflicts << ',' << format_number(r.execution_time_ms)
        << ",[";
    for (std::size_t j = 0; j < r.dispatcher_counts.size(); ++j) {
      out << (j ? ";" : "") << r.dispatcher_counts[j];
    }
    out << "]," << r.quota_resets << ',' << r.algorithm << '\n';
  }
}

inline Json metrics_to_json(const MetricsReport& r) {
  Json j;
  j["latency_seconds"] = r.latency_seconds;
  j["total_distance_cells"] = r.total_distance_cells;
  j["intersecting_paths"] = r.intersecting_paths;
  j["conflicts"] = r.conflicts;
  j["execution_time_ms"] = r.execution_time_ms;
  j["dispatcher_counts"] = r.dispatcher_counts;
  j["quota_resets"] = r.quota_resets;
  j["algorithm"] = r.algorithm;
  return j;
}

inline MetricsReport metrics_from_json(const Json& j) {
  try {
    MetricsReport r;
    r.latency_seconds = j.at("latency_seconds").get<double>();
    r.total_distance_cells = j.at("total_distance_cells").get<double>();
    r.intersecting_paths = j.at("intersecting_paths").get<std::size_t>();
    r.conflicts = j.at("conflicts").get<std::size_t>();
    r.execution_time_ms = j.at("execution_time_ms").get<double>();
    r.dispatcher_counts = j.at("dispatcher_counts").get<std::vector<std::size_t>>();
    r.quota_resets = j.value("quota_resets", std::size_t{0});
    r.algorithm = j.value("algorithm", std::string{});
    if (r.conflicts > r.intersecting_paths) {
      throw ParseError("<metrics>", 0, "conflicts exceed intersecting paths");
    }
    return r;
  } catch (const Json::exception& e) {
    throw ParseError("<metrics>", 0, e.what());
  }
}

inline void write_metrics_json(std::ostream& out, const std::vector<MetricsReport>& reports) {
  Json arr = Json::array();
  for (const auto& r : reports) arr.push_back(metrics_to_json(r));
  out << arr.dump(2) << '\n';
}

inline std::vector<MetricsReport> read_metrics_json(std::istream& in) {
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError("<metrics>", 0, e.what());
  }
  std::vector<MetricsReport> out;
  if (doc.is_object()) {
    out.push_back(metrics_from_json(doc));
  } else {
    for (const auto& j : doc) out.push_back(metrics_from_json(j));
  }
  return out;
}

/// Two-column CSV for plotting: cloud index, value.
inline void write_series_csv(std::ostream& out, std::string_view name,
                             const std::vector<std::pair<std::size_t, double>>& series) {
  out << "cloud_index," << name << '\n';
  for (const auto& [x, y] : series) out << x << ',' << format_number(y) << '\n';
}

// ---------------------------------------------------------------------------
// Encodings

namespace detail {

inline Json cell_json(const Cell& c) { return Json::array({c.x, c.y, c.z}); }
inline Json color_json(const Rgb& c) { return Json::array({c.r, c.g, c.b}); }
inline Json point_json(const Point& p) {
  return Json::array({p.cell.x, p.cell.y, p.cell.z, p.color.r, p.color.g, p.color.b});
}

inline Cell cell_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("<encoding>", 0, "cell must be [x,y,z]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}
inline Rgb color_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("<encoding>", 0, "color must be [r,g,b]");
  return {j[0].get<std::uint8_t>(), j[1].get<std::uint8_t>(), j[2].get<std::uint8_t>()};
}
inline Point point_from(const Json& j) {
  if (!j.is_array() || j.size() != 6) throw ParseError("<encoding>", 0, "point must be [x,y,z,r,g,b]");
  return {{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()},
          {j[3].get<std::uint8_t>(), j[4].get<std::uint8_t>(), j[5].get<std::uint8_t>()}};
}

inline Json vec_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }
inline Vec3 vec_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("<encoding>", 0, "position must be [x,y,z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

/// Plans only; wall-clock metrics are left out so equal plans serialize to
/// equal bytes.
inline Json encoding_to_json(const SceneEncoding& enc, double fls_speed) {
  Json doc;
  doc["fls_speed"] = fls_speed;
  Json plan;
  plan["algorithm"] = enc.initial_plan.algorithm;
  plan["quota_resets"] = enc.initial_plan.quota_resets;
  plan["inventory_fallbacks"] = enc.initial_plan.inventory_fallbacks;
  plan["assignments"] = Json::array();
  for (const auto& a : enc.initial_plan.assignments) {
    Json pts = Json::array();
    for (const auto& p : a) pts.push_back(detail::point_json(p));
    plan["assignments"].push_back(std::move(pts));
  }
  doc["initial_plan"] = std::move(plan);

  doc["transitions"] = Json::array();
  for (const auto& t : enc.transitions) {
    Json jt;
    jt["unchanged"] = t.unchanged;
    jt["epsilon"] = Json::array();
    for (const auto& f : t.epsilon) {
      Json jf;
      jf["src"] = detail::vec_json(f.source);
      jf["dst"] = detail::point_json(f.destination);
      jf["launch"] = f.launch_time;
      if (f.lights_at) jf["lights_at"] = *f.lights_at;
      jt["epsilon"].push_back(std::move(jf));
    }
    jt["gamma"] = Json::array();
    for (const auto& g : t.gamma) {
      jt["gamma"].push_back(Json{{"cell", detail::cell_json(g.cell)},
                                 {"from", detail::color_json(g.from)},
                                 {"to", detail::color_json(g.to)}});
    }
    jt["delta"] = Json::array();
    for (const auto& p : t.delta) jt["delta"].push_back(detail::point_json(p));
    jt["mu"] = Json::array();
    for (const auto& p : t.mu) jt["mu"].push_back(detail::point_json(p));
    jt["recalls"] = Json::array();
    for (const auto& r : t.recalls) {
      jt["recalls"].push_back(Json{{"from", detail::point_json(r.from)}, {"station", r.station_id}});
    }
    jt["deploys"] = Json::array();
    for (const auto& d : t.fresh_deploys) {
      jt["deploys"].push_back(Json{{"dispatcher", d.dispatcher_id}, {"to", detail::point_json(d.to)}});
    }
    doc["transitions"].push_back(std::move(jt));
  }
  return doc;
}

inline SceneEncoding encoding_from_json(const Json& doc) {
  try {
    SceneEncoding enc;
    const double speed = doc.at("fls_speed").get<double>();
    if (!(speed > 0.0)) throw ParseError("<encoding>", 0, "fls_speed must be positive");
    const auto& plan = doc.at("initial_plan");
    enc.initial_plan.algorithm = plan.at("algorithm").get<std::string>();
    enc.initial_plan.quota_resets = plan.at("quota_resets").get<std::size_t>();
    enc.initial_plan.inventory_fallbacks = plan.value("inventory_fallbacks", std::size_t{0});
    for (const auto& a : plan.at("assignments")) {
      std::vector<Point> pts;
      for (const auto& p : a) pts.push_back(detail::point_from(p));
      enc.initial_plan.assignments.push_back(std::move(pts));
    }
    for (const auto& jt : doc.at("transitions")) {
      TransitionPlan t;
      t.unchanged = jt.at("unchanged").get<std::size_t>();
      for (const auto& jf : jt.at("epsilon")) {
        FlightPath f = FlightPath::make(detail::vec_from(jf.at("src")), detail::point_from(jf.at("dst")),
                                        jf.at("launch").get<double>(), speed);
        if (jf.contains("lights_at")) f.lights_at = jf["lights_at"].get<std::size_t>();
        t.epsilon.push_back(f);
      }
      for (const auto& g : jt.at("gamma")) {
        t.gamma.push_back({detail::cell_from(g.at("cell")), detail::color_from(g.at("from")),
                           detail::color_from(g.at("to"))});
      }
      for (const auto& p : jt.at("delta")) t.delta.push_back(detail::point_from(p));
      for (const auto& p : jt.at("mu")) t.mu.push_back(detail::point_from(p));
      for (const auto& r : jt.at("recalls")) {
        t.recalls.push_back({detail::point_from(r.at("from")), r.at("station").get<int>()});
      }
      for (const auto& d : jt.at("deploys")) {
        t.fresh_deploys.push_back({d.at("dispatcher").get<int>(), detail::point_from(d.at("to"))});
      }
      enc.transitions.push_back(std::move(t));
    }
    return enc;
  } catch (const Json::exception& e) {
    throw ParseError("<encoding>", 0, e.what());
  }
}

inline void save_encoding(const std::filesystem::path& path, const SceneEncoding& enc,
                          double fls_speed) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << encoding_to_json(enc, fls_speed).dump() << '\n';
}

inline SceneEncoding load_encoding(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return encoding_from_json(doc);
}

// ---------------------------------------------------------------------------
// Deployment schedules and conflict reports

inline Json schedule_to_json(const DeploymentSchedule& schedule) {
  Json arr = Json::array();
  for (const auto& p : schedule.paths) {
    arr.push_back(Json{{"dispatcher", p.dispatcher_id},
                       {"src", detail::vec_json(p.source)},
                       {"dst", detail::point_json(p.destination)},
                       {"launch", p.launch_time},
                       {"arrival", p.arrival_time()}});
  }
  return arr;
}

inline Json conflicts_to_json(const ConflictReport& report) {
  const auto pairs = [](const std::vector<PathPair>& list) {
    Json arr = Json::array();
    for (const auto& p : list) {
      arr.push_back(Json{{"first", p.first},
                         {"second", p.second},
                         {"closest", detail::vec_json(p.closest)},
                         {"separation", p.separation}});
    }
    return arr;
  };
  Json doc;
  doc["threshold"] = report.threshold;
  doc["intersecting_paths"] = report.intersecting.size();
  doc["conflicts"] = report.conflicts.size();
  doc["intersecting"] = pairs(report.intersecting);
  doc["conflicting"] = pairs(report.conflicts);
  return doc;
}

}  // namespace flsplan::io
