#pragma once

// Core domain types for FLS display planning: cells, colors, point clouds,
// dispatchers, display configuration and the plan/encoding value types that
// the other modules produce.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace flsplan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a type invariant (duplicate cells, bad parameters, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The requested plan cannot be produced, e.g. not enough FLSs.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};

  friend bool operator==(const Vec3&, const Vec3&) = default;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, const Vec3& a) { return a * s; }

  [[nodiscard]] double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  [[nodiscard]] double norm() const { return std::sqrt(dot(*this)); }
};

/// Integer address of one display cell.
struct Cell {
  int x{0};
  int y{0};
  int z{0};

  friend auto operator<=>(const Cell&, const Cell&) = default;

  [[nodiscard]] Vec3 as_vec() const {
    return {static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
  }
  [[nodiscard]] int operator[](std::size_t axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
};

struct CellHash {
  std::size_t operator()(const Cell& c) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(c.x);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(c.y);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(c.z);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

struct Rgb {
  std::uint8_t r{255};
  std::uint8_t g{255};
  std::uint8_t b{255};

  friend auto operator<=>(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{255, 255, 255};

struct Point {
  Cell cell;
  Rgb color{kWhite};

  friend auto operator<=>(const Point&, const Point&) = default;
};

inline std::string to_string(const Cell& c) {
  std::ostringstream os;
  os << '(' << c.x << ',' << c.y << ',' << c.z << ')';
  return os.str();
}

[[nodiscard]] inline std::int64_t squared_distance(const Cell& a, const Cell& b) {
  const std::int64_t dx = std::int64_t{a.x} - b.x;
  const std::int64_t dy = std::int64_t{a.y} - b.y;
  const std::int64_t dz = std::int64_t{a.z} - b.z;
  return dx * dx + dy * dy + dz * dz;
}

/// Straight-line distance in cell units.
[[nodiscard]] inline double euclidean_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

[[nodiscard]] inline double euclidean_distance(const Cell& a, const Cell& b) {
  return std::sqrt(static_cast<double>(squared_distance(a, b)));
}

/// Display volume L x H x D in cells; y is the vertical axis.
struct Dims {
  int length{100};
  int height{100};
  int depth{100};

  friend bool operator==(const Dims&, const Dims&) = default;

  [[nodiscard]] int extent(std::size_t axis) const {
    return axis == 0 ? length : (axis == 1 ? height : depth);
  }
  [[nodiscard]] bool contains(const Cell& c) const {
    return c.x >= 0 && c.x < length && c.y >= 0 && c.y < height && c.z >= 0 && c.z < depth;
  }
  [[nodiscard]] std::int64_t volume() const {
    return std::int64_t{length} * height * depth;
  }
};

/// An illumination frame: distinct colored cells. Immutable once built.
class PointCloud {
 public:
  PointCloud() = default;

  /// Throws ValidationError when empty or when two points share a cell.
  explicit PointCloud(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) throw ValidationError("point cloud must contain at least one point");
    std::unordered_set<Cell, CellHash> seen;
    seen.reserve(points_.size() * 2);
    for (const auto& p : points_) {
      if (!seen.insert(p.cell).second) {
        throw ValidationError("duplicate point coordinate " + to_string(p.cell));
      }
    }
  }

  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] bool empty() const { return points_.empty(); }
  [[nodiscard]] const std::vector<Point>& points() const { return points_; }
  [[nodiscard]] const Point& operator[](std::size_t i) const { return points_[i]; }
  [[nodiscard]] auto begin() const { return points_.begin(); }
  [[nodiscard]] auto end() const { return points_.end(); }

  void check_within(const Dims& dims) const {
    for (const auto& p : points_) {
      if (!dims.contains(p.cell)) {
        throw ValidationError("point " + to_string(p.cell) + " lies outside the display volume");
      }
    }
  }

  /// Same cells with the same colors, order ignored.
  [[nodiscard]] bool same_content(const PointCloud& other) const {
    if (size() != other.size()) return false;
    auto a = points_;
    auto b = other.points_;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
  }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Point> points_;
};

/// A motion illumination: clouds shown in order at frame_rate clouds/second.
struct Scene {
  std::vector<PointCloud> clouds;
  double frame_rate{1.0};

  void validate(const Dims& dims) const {
    if (clouds.empty()) throw ValidationError("scene must contain at least one point cloud");
    if (!(frame_rate > 0.0)) throw ValidationError("frame rate must be positive");
    for (const auto& c : clouds) {
      if (c.empty()) throw ValidationError("scene contains an empty point cloud");
      c.check_within(dims);
    }
  }
};

struct Dispatcher {
  int id{1};
  Vec3 position;
  std::optional<std::size_t> inventory;  ///< nullopt: unbounded

  [[nodiscard]] bool unbounded() const { return !inventory.has_value(); }
};

struct DisplayConfig {
  Dims dims;
  std::vector<Dispatcher> dispatchers;
  double deploy_rate{10.0};        ///< FLSs per second per dispatcher
  double fls_speed{4.0};           ///< cells per second
  double conflict_threshold{0.2};  ///< cells

  void validate() const {
    if (dims.length <= 0 || dims.height <= 0 || dims.depth <= 0) {
      throw ValidationError("display dimensions must be positive");
    }
    if (dispatchers.empty()) throw ValidationError("display needs at least one dispatcher");
    for (std::size_t i = 0; i < dispatchers.size(); ++i) {
      if (dispatchers[i].id != static_cast<int>(i) + 1) {
        throw ValidationError("dispatcher ids must be dense 1..n in order");
      }
    }
    if (!(deploy_rate > 0.0)) throw ValidationError("deployment rate must be positive");
    if (!(fls_speed > 0.0)) throw ValidationError("FLS speed must be positive");
    if (!(conflict_threshold > 0.0)) throw ValidationError("conflict threshold must be positive");
  }

  /// Index (not id) of the nearest dispatcher; ties go to the lowest id.
  /// When `usable` is given, only dispatchers it accepts are considered.
  [[nodiscard]] std::optional<std::size_t> nearest_dispatcher(
      const Vec3& p, const std::function<bool(std::size_t)>& usable = {}) const {
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (std::size_t j = 0; j < dispatchers.size(); ++j) {
      if (usable && !usable(j)) continue;
      const double d = euclidean_distance(p, dispatchers[j].position);
      if (!best || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    return best;
  }

  /// One dispatcher at each corner of the volume. Corner ids follow
  /// 1 + 4*(x at L) + 2*(y at H) + (z at D).
  static DisplayConfig corners8(Dims dims, double rate = 10.0, double speed = 4.0,
                                std::optional<std::size_t> inventory = std::nullopt) {
    DisplayConfig cfg;
    cfg.dims = dims;
    cfg.deploy_rate = rate;
    cfg.fls_speed = speed;
    int id = 1;
    for (int xi = 0; xi < 2; ++xi)
      for (int yi = 0; yi < 2; ++yi)
        for (int zi = 0; zi < 2; ++zi) {
          cfg.dispatchers.push_back(Dispatcher{
              id++,
              Vec3{xi ? double(dims.length) : 0.0, yi ? double(dims.height) : 0.0,
                   zi ? double(dims.depth) : 0.0},
              inventory});
        }
    return cfg;
  }

  /// The four corners of the floor (y = 0).
  static DisplayConfig corners4_bottom(Dims dims, double rate = 10.0, double speed = 4.0,
                                       std::optional<std::size_t> inventory = std::nullopt) {
    DisplayConfig cfg;
    cfg.dims = dims;
    cfg.deploy_rate = rate;
    cfg.fls_speed = speed;
    int id = 1;
    for (int xi = 0; xi < 2; ++xi)
      for (int zi = 0; zi < 2; ++zi) {
        cfg.dispatchers.push_back(Dispatcher{
            id++, Vec3{xi ? double(dims.length) : 0.0, 0.0, zi ? double(dims.depth) : 0.0},
            inventory});
      }
    return cfg;
  }
};

struct FlightPath {
  Vec3 source;
  Point destination;
  double launch_time{0.0};
  double distance{0.0};
  double travel_time{0.0};
  int dispatcher_id{0};  ///< 0 when the source is a display cell
  /// Cloud index at which the FLS lights up when it is later than the next
  /// cloud (a dark FLS parked for reuse). Empty for ordinary transitions.
  std::optional<std::size_t> lights_at;

  [[nodiscard]] double arrival_time() const { return launch_time + travel_time; }

  static FlightPath make(const Vec3& source, const Point& destination, double launch, double speed,
                         int dispatcher_id = 0) {
    FlightPath fp;
    fp.source = source;
    fp.destination = destination;
    fp.launch_time = launch;
    fp.distance = euclidean_distance(source, destination.cell.as_vec());
    fp.travel_time = fp.distance / speed;
    fp.dispatcher_id = dispatcher_id;
    return fp;
  }

  friend bool operator==(const FlightPath&, const FlightPath&) = default;
};

struct ColorChange {
  Cell cell;
  Rgb from;
  Rgb to;

  friend auto operator<=>(const ColorChange&, const ColorChange&) = default;
};

/// Per-dispatcher point assignment for one static illumination.
struct DeploymentPlan {
  std::string algorithm;
  std::vector<std::vector<Point>> assignments;  ///< indexed by dispatcher id - 1
  std::size_t quota_resets{0};
  /// Points MinDist could not give to their nearest dispatcher because its
  /// inventory ran out.
  std::size_t inventory_fallbacks{0};

  [[nodiscard]] std::size_t point_count() const {
    std::size_t n = 0;
    for (const auto& a : assignments) n += a.size();
    return n;
  }
  [[nodiscard]] std::vector<std::size_t> counts() const {
    std::vector<std::size_t> out;
    out.reserve(assignments.size());
    for (const auto& a : assignments) out.push_back(a.size());
    return out;
  }
  [[nodiscard]] std::vector<Point> all_points() const {
    std::vector<Point> out;
    out.reserve(point_count());
    for (const auto& a : assignments) out.insert(out.end(), a.begin(), a.end());
    return out;
  }

  friend bool operator==(const DeploymentPlan&, const DeploymentPlan&) = default;
};

struct Recall {
  Point from;
  int station_id{0};

  friend auto operator<=>(const Recall&, const Recall&) = default;
};

struct FreshDeploy {
  int dispatcher_id{0};
  Point to;

  friend auto operator<=>(const FreshDeploy&, const FreshDeploy&) = default;
};

/// Everything needed to go from cloud i to cloud i+1.
struct TransitionPlan {
  std::vector<FlightPath> epsilon;         ///< flights departing at this transition
  std::vector<ColorChange> gamma;          ///< stationary FLSs changing color
  std::vector<Point> delta;                ///< freed FLSs left over after matching
  std::vector<Point> mu;                   ///< cells of cloud i+1 left without an FLS
  std::vector<Recall> recalls;             ///< FLSs flying back to a station
  std::vector<FreshDeploy> fresh_deploys;  ///< new FLSs for cloud i+1
  std::size_t unchanged{0};                ///< stationary FLSs keeping their color

  [[nodiscard]] double flight_distance() const {
    double d = 0.0;
    for (const auto& f : epsilon) d += f.distance;
    return d;
  }

  friend bool operator==(const TransitionPlan&, const TransitionPlan&) = default;
};

struct TransitionMetrics {
  std::size_t flights{0};
  double distance{0.0};
  double elapsed_ms{0.0};
};

struct SceneEncoding {
  DeploymentPlan initial_plan;
  std::vector<TransitionPlan> transitions;
  std::vector<TransitionMetrics> metrics;  ///< per transition; wall-clock, not serialized

  /// Plans compare equal regardless of timing data.
  friend bool operator==(const SceneEncoding& a, const SceneEncoding& b) {
    return a.initial_plan == b.initial_plan && a.transitions == b.transitions;
  }
};

}  // namespace flsplan
