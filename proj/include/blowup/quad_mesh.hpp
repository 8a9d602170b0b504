#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace blowup {

/// A node of the quadtree forest: refinement level plus integer position on
/// the level's uniform lattice (i in [0, nx 2^level), j in [0, ny 2^level)).
struct CellKey {
  int level = 0;
  std::int64_t i = 0;
  std::int64_t j = 0;

  auto operator<=>(const CellKey&) const = default;

  CellKey parent() const { return {level - 1, i >> 1, j >> 1}; }
  /// Children in the order SW, SE, NW, NE.
  CellKey child(int c) const { return {level + 1, 2 * i + (c & 1), 2 * j + (c >> 1)}; }
  int child_slot() const { return static_cast<int>((i & 1) + 2 * (j & 1)); }
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.level) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.i) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.j) + 0x94D049BB133111EBULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double diameter() const;
};

/// Cell sides, also used as direction of the outward normal.
enum class Side { West = 0, East = 1, South = 2, North = 3 };

/// A face of the active mesh: the intersection of two active cells' sides
/// (the finer cell's full side at a hanging node) or a boundary side.
struct Edge {
  int minus = -1;  ///< active index of the cell the normal points out of
  int plus = -1;   ///< active index of the other cell, -1 on the boundary
  Side side = Side::East;  ///< side of `minus` the edge lies on
  double nx = 0.0, ny = 0.0;
  double xa = 0.0, ya = 0.0, xb = 0.0, yb = 0.0;  ///< end points
  double length = 0.0;
  std::int64_t la[2] = {0, 0};  ///< end points on the finest vertex lattice
  std::int64_t lb[2] = {0, 0};

  bool boundary() const { return plus < 0; }
};

/// Quadtree forest over an nx-by-ny grid of a box, kept 1-irregular: cells
/// sharing an edge differ by at most one level.
class MeshForest {
 public:
  static constexpr int kMaxLevel = 24;

  MeshForest(Box domain, int nx, int ny);

  const Box& domain() const { return domain_; }
  int root_nx() const { return nx_; }
  int root_ny() const { return ny_; }

  /// Active cells in depth-first order (roots row-major, children SW,SE,NW,NE).
  std::span<const CellKey> active() const { return active_; }
  std::size_t num_active() const { return active_.size(); }
  /// Active index of key, or -1.
  int index_of(const CellKey& key) const;

  bool exists(const CellKey& key) const;
  bool is_refined(const CellKey& key) const { return refined_.contains(key); }
  bool is_active(const CellKey& key) const { return exists(key) && !is_refined(key); }

  Box box(const CellKey& key) const;
  Box box(int cell) const { return box(active_[cell]); }

  const std::vector<Edge>& edges() const { return edges_; }
  /// Edges of the active mesh whose closure meets the closure of the cell.
  std::vector<int> edge_patch(int cell) const;

  int max_level() const;

  /// Splits the given active cells, then refines further until the mesh is
  /// 1-irregular again. Cells are processed in ascending index order.
  void refine(std::span<const int> cells);
  /// Merges sibling quadruples whose four members are all marked, when the
  /// merge keeps the mesh 1-irregular. Partial families are left alone.
  void coarsen(std::span<const int> cells);

  MeshForest refined(std::span<const int> cells) const;
  MeshForest coarsened(std::span<const int> cells) const;

  bool is_one_irregular() const;
  double total_area() const;

  /// The set of refined nodes, which determines the forest.
  const std::unordered_set<CellKey, CellKeyHash>& refined_nodes() const { return refined_; }

  /// Plain-text cell list: a header line with the domain and root grid, then
  /// one line "level i j x0 y0 x1 y1" per active cell.
  std::string to_text() const;
  static MeshForest from_text(const std::string& text);

  /// Builds a forest with the given refined set over the same root grid.
  MeshForest with_refined(std::unordered_set<CellKey, CellKeyHash> refined) const;

  bool operator==(const MeshForest& other) const;

 private:
  void rebuild();
  void collect_active(const CellKey& key, std::vector<CellKey>& out) const;
  bool in_range(const CellKey& key) const;
  /// Deepest existing node containing the same-level key (or the key itself).
  CellKey covering(CellKey key) const;
  CellKey neighbor_key(const CellKey& key, Side side) const;
  std::int64_t lattice_scale(int level) const { return std::int64_t{1} << (kMaxLevel - level); }

  Box domain_;
  int nx_;
  int ny_;
  std::unordered_set<CellKey, CellKeyHash> refined_;

  std::vector<CellKey> active_;
  std::unordered_map<CellKey, int, CellKeyHash> index_;
  std::vector<Edge> edges_;
  std::unordered_map<std::uint64_t, std::vector<int>> vertex_edges_;
};

/// Coarsest common refinement of two meshes over the same root grid.
struct CommonRefinement {
  MeshForest overlay;
  std::vector<int> ancestor_a;  ///< active index in mesh a of each overlay cell's ancestor
  std::vector<int> ancestor_b;
};

CommonRefinement common_refinement(const MeshForest& a, const MeshForest& b);

/// Active index in `mesh` of the active ancestor (or self) of key.
int active_ancestor(const MeshForest& mesh, CellKey key);

}  // namespace blowup
