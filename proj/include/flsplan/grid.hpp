#pragma once

// Axis-aligned cuboid grid built on the first cloud of a group of point
// clouds. Cuboids split on overflow; later clouds reuse the same partition.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flsplan/model.hpp"
#include "flsplan/parallel.hpp"

namespace flsplan {

/// Half-open integer box [lo, hi) per axis.
struct Box {
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{0, 0, 0};

  [[nodiscard]] bool contains(const Cell& c) const {
    for (std::size_t a = 0; a < 3; ++a) {
      if (c[a] < lo[a] || c[a] >= hi[a]) return false;
    }
    return true;
  }
  [[nodiscard]] std::int64_t volume() const {
    return std::int64_t{hi[0] - lo[0]} * (hi[1] - lo[1]) * (hi[2] - lo[2]);
  }

  friend bool operator==(const Box&, const Box&) = default;
};

struct Cuboid {
  std::size_t id{0};
  Box bounds;
  std::vector<std::size_t> members;  ///< indices into the first cloud
};

/// Which cuboid each point of a cloud falls in.
struct Occupancy {
  std::vector<std::size_t> cuboid_of;  ///< per point index
  std::vector<std::size_t> counts;     ///< per cuboid id
};

class Grid {
 public:
  [[nodiscard]] const std::vector<Cuboid>& cuboids() const { return cuboids_; }
  [[nodiscard]] std::size_t size() const { return cuboids_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& neighbors(std::size_t id) const {
    return neighbors_.at(id);
  }
  [[nodiscard]] std::size_t splits() const { return splits_; }
  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] std::optional<std::size_t> capacity() const { return capacity_; }

  /// Cuboid holding `cell`; throws ValidationError outside the display.
  [[nodiscard]] std::size_t locate(const Cell& cell) const {
    if (!dims_.contains(cell)) {
      throw ValidationError("point " + to_string(cell) + " lies outside the display volume");
    }
    std::size_t n = 0;
    while (nodes_[n].axis >= 0) {
      const Node& node = nodes_[n];
      n = cell[static_cast<std::size_t>(node.axis)] < node.split ? node.low : node.high;
    }
    return nodes_[n].cuboid;
  }

  /// Builds the grid by inserting the cloud's points in order and splitting
  /// any cuboid holding more than `capacity` points. Each split takes the
  /// next axis of a single x, y, z round-robin shared by all cuboids and cuts
  /// after the ceil(k/2)-th member in coordinate order. Without a capacity
  /// the grid is one cuboid covering the display.
  static Grid build(const PointCloud& cloud, const Dims& dims,
                    std::optional<std::size_t> capacity) {
    if (capacity && *capacity == 0) throw ValidationError("cuboid capacity must be at least 1");
    Grid g;
    g.dims_ = dims;
    g.capacity_ = capacity;
    g.cuboids_.push_back(Cuboid{0, Box{{0, 0, 0}, {dims.length, dims.height, dims.depth}}, {}});
    g.nodes_.push_back(Node{});
    g.leaf_of_.push_back(0);

    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const std::size_t c = g.locate(cloud[i].cell);
      g.cuboids_[c].members.push_back(i);
      if (capacity && g.cuboids_[c].members.size() > *capacity) g.split(c, cloud);
    }
    g.compute_neighbors();
    return g;
  }

 private:
  struct Node {
    int axis{-1};  ///< -1 for a leaf
    int split{0};
    std::size_t low{0};
    std::size_t high{0};
    std::size_t cuboid{0};
  };

  void split(std::size_t id, const PointCloud& cloud) {
    const auto& members = cuboids_[id].members;
    for (int attempt = 0; attempt < 3; ++attempt) {
      const std::size_t axis = (round_robin_ + static_cast<std::size_t>(attempt)) % 3;
      std::vector<int> coords;
      coords.reserve(members.size());
      for (const std::size_t m : members) coords.push_back(cloud[m].cell[axis]);
      std::sort(coords.begin(), coords.end());
      const int median = coords[(coords.size() + 1) / 2 - 1];
      int cut = 0;
      if (coords.back() > median) {
        cut = median + 1;
      } else if (coords.front() < median) {
        cut = median;
      } else {
        continue;  // every member shares this coordinate
      }
      round_robin_ += static_cast<std::size_t>(attempt) + 1;
      apply_split(id, axis, cut, cloud);
      return;
    }
    throw Error("cuboid " + std::to_string(id) + " overflows capacity " +
                std::to_string(*capacity_) + " but its points cannot be separated");
  }

  void apply_split(std::size_t id, std::size_t axis, int cut, const PointCloud& cloud) {
    const std::size_t high_id = cuboids_.size();
    Cuboid high{high_id, cuboids_[id].bounds, {}};
    high.bounds.lo[axis] = cut;
    cuboids_[id].bounds.hi[axis] = cut;

    std::vector<std::size_t> keep;
    for (const std::size_t m : cuboids_[id].members) {
      (cloud[m].cell[axis] < cut ? keep : high.members).push_back(m);
    }
    cuboids_[id].members = std::move(keep);
    cuboids_.push_back(std::move(high));

    const std::size_t parent = leaf_of_[id];
    const std::size_t low_node = nodes_.size();
    nodes_.push_back(Node{-1, 0, 0, 0, id});
    nodes_.push_back(Node{-1, 0, 0, 0, high_id});
    nodes_[parent] = Node{static_cast<int>(axis), cut, low_node, low_node + 1, 0};
    leaf_of_[id] = low_node;
    leaf_of_.push_back(low_node + 1);
    ++splits_;

    if (cuboids_[id].members.size() > *capacity_) split(id, cloud);
    if (cuboids_[high_id].members.size() > *capacity_) split(high_id, cloud);
  }

  /// Leaves whose box overlaps `query` with positive volume.
  void collect(std::size_t n, const Box& query, std::vector<std::size_t>& out) const {
    const Node& node = nodes_[n];
    if (node.axis < 0) {
      const Box& b = cuboids_[node.cuboid].bounds;
      for (std::size_t a = 0; a < 3; ++a) {
        if (std::max(b.lo[a], query.lo[a]) >= std::min(b.hi[a], query.hi[a])) return;
      }
      out.push_back(node.cuboid);
      return;
    }
    const auto axis = static_cast<std::size_t>(node.axis);
    if (query.lo[axis] < node.split) collect(node.low, query, out);
    if (query.hi[axis] > node.split) collect(node.high, query, out);
  }

  /// Two cuboids are neighbors when they overlap along two axes and abut
  /// along the third. Found by probing the one-cell slab beyond each face.
  void compute_neighbors() {
    neighbors_.assign(cuboids_.size(), {});
    for (const auto& c : cuboids_) {
      auto& out = neighbors_[c.id];
      for (std::size_t a = 0; a < 3; ++a) {
        Box slab = c.bounds;
        if (c.bounds.hi[a] < dims_.extent(a)) {
          slab.lo[a] = c.bounds.hi[a];
          slab.hi[a] = c.bounds.hi[a] + 1;
          collect(0, slab, out);
        }
        slab = c.bounds;
        if (c.bounds.lo[a] > 0) {
          slab.lo[a] = c.bounds.lo[a] - 1;
          slab.hi[a] = c.bounds.lo[a];
          collect(0, slab, out);
        }
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
  }

  Dims dims_;
  std::optional<std::size_t> capacity_;
  std::vector<Cuboid> cuboids_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> leaf_of_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::size_t round_robin_{0};
  std::size_t splits_{0};
};

inline Grid build_grid(const PointCloud& first, const Dims& dims,
                       std::optional<std::size_t> capacity) {
  return Grid::build(first, dims, capacity);
}

/// Places every point of `cloud` in the cuboid containing it. Never splits,
/// so counts may exceed the capacity.
inline Occupancy populate_grid(const Grid& grid, const PointCloud& cloud) {
  Occupancy occ;
  occ.cuboid_of.resize(cloud.size());
  occ.counts.assign(grid.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    occ.cuboid_of[i] = grid.locate(cloud[i].cell);
    ++occ.counts[occ.cuboid_of[i]];
  }
  return occ;
}

}  // namespace flsplan
