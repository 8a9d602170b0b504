#include "blowup/quad_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace blowup {

namespace {

std::uint64_t pack(std::int64_t x, std::int64_t y) {
  return (static_cast<std::uint64_t>(x) << 32) ^ static_cast<std::uint64_t>(y);
}

constexpr Side kSides[4] = {Side::West, Side::East, Side::South, Side::North};

}  // namespace

double Box::diameter() const { return std::hypot(width(), height()); }

MeshForest::MeshForest(Box domain, int nx, int ny) : domain_(domain), nx_(nx), ny_(ny) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("MeshForest: root grid must be at least 1x1");
  if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0))
    throw std::invalid_argument("MeshForest: empty domain");
  // Lattice coordinates are packed into 32 bits each.
  if (nx > 128 || ny > 128)
    throw std::invalid_argument("MeshForest: root grid too large");
  rebuild();
}

bool MeshForest::in_range(const CellKey& key) const {
  if (key.level < 0) return false;
  const std::int64_t n = std::int64_t{1} << key.level;
  return key.i >= 0 && key.j >= 0 && key.i < nx_ * n && key.j < ny_ * n;
}

bool MeshForest::exists(const CellKey& key) const {
  if (!in_range(key)) return false;
  if (key.level == 0) return true;
  return refined_.contains(key.parent());
}

int MeshForest::index_of(const CellKey& key) const {
  const auto it = index_.find(key);
  return it == index_.end() ? -1 : it->second;
}

Box MeshForest::box(const CellKey& key) const {
  const double n = std::ldexp(1.0, key.level);
  const double hx = (domain_.x1 - domain_.x0) / (nx_ * n);
  const double hy = (domain_.y1 - domain_.y0) / (ny_ * n);
  Box b;
  b.x0 = domain_.x0 + static_cast<double>(key.i) * hx;
  b.y0 = domain_.y0 + static_cast<double>(key.j) * hy;
  b.x1 = b.x0 + hx;
  b.y1 = b.y0 + hy;
  return b;
}

int MeshForest::max_level() const {
  int level = 0;
  for (const CellKey& k : active_) level = std::max(level, k.level);
  return level;
}

void MeshForest::collect_active(const CellKey& key, std::vector<CellKey>& out) const {
  if (refined_.contains(key)) {
    for (int c = 0; c < 4; ++c) collect_active(key.child(c), out);
  } else {
    out.push_back(key);
  }
}

CellKey MeshForest::covering(CellKey key) const {
  while (key.level > 0 && !exists(key)) key = key.parent();
  return key;
}

CellKey MeshForest::neighbor_key(const CellKey& key, Side side) const {
  CellKey n = key;
  switch (side) {
    case Side::West: n.i -= 1; break;
    case Side::East: n.i += 1; break;
    case Side::South: n.j -= 1; break;
    case Side::North: n.j += 1; break;
  }
  return n;
}

void MeshForest::rebuild() {
  active_.clear();
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) collect_active({0, i, j}, active_);
  index_.clear();
  index_.reserve(active_.size());
  for (std::size_t c = 0; c < active_.size(); ++c) index_.emplace(active_[c], static_cast<int>(c));

  edges_.clear();
  vertex_edges_.clear();
  const double lx = (domain_.x1 - domain_.x0) / (static_cast<double>(nx_) * std::ldexp(1.0, kMaxLevel));
  const double ly = (domain_.y1 - domain_.y0) / (static_cast<double>(ny_) * std::ldexp(1.0, kMaxLevel));
  for (std::size_t c = 0; c < active_.size(); ++c) {
    const CellKey& key = active_[c];
    const std::int64_t s = lattice_scale(key.level);
    const std::int64_t x0 = key.i * s, x1 = (key.i + 1) * s;
    const std::int64_t y0 = key.j * s, y1 = (key.j + 1) * s;
    for (Side side : kSides) {
      const CellKey nk = neighbor_key(key, side);
      int plus = -1;
      if (in_range(nk)) {
        if (exists(nk)) {
          if (refined_.contains(nk)) continue;  // finer neighbours own the faces
          if (side == Side::West || side == Side::South) continue;  // counted from the other side
          plus = index_of(nk);
        } else {
          plus = index_of(covering(nk));
        }
      }
      Edge e;
      e.minus = static_cast<int>(c);
      e.plus = plus;
      e.side = side;
      switch (side) {
        case Side::West: e.nx = -1.0; e.la[0] = x0; e.la[1] = y0; e.lb[0] = x0; e.lb[1] = y1; break;
        case Side::East: e.nx = 1.0; e.la[0] = x1; e.la[1] = y0; e.lb[0] = x1; e.lb[1] = y1; break;
        case Side::South: e.ny = -1.0; e.la[0] = x0; e.la[1] = y0; e.lb[0] = x1; e.lb[1] = y0; break;
        case Side::North: e.ny = 1.0; e.la[0] = x0; e.la[1] = y1; e.lb[0] = x1; e.lb[1] = y1; break;
      }
      e.xa = domain_.x0 + static_cast<double>(e.la[0]) * lx;
      e.ya = domain_.y0 + static_cast<double>(e.la[1]) * ly;
      e.xb = domain_.x0 + static_cast<double>(e.lb[0]) * lx;
      e.yb = domain_.y0 + static_cast<double>(e.lb[1]) * ly;
      e.length = std::hypot(e.xb - e.xa, e.yb - e.ya);
      const int id = static_cast<int>(edges_.size());
      edges_.push_back(e);
      vertex_edges_[pack(e.la[0], e.la[1])].push_back(id);
      vertex_edges_[pack(e.lb[0], e.lb[1])].push_back(id);
    }
  }
}

std::vector<int> MeshForest::edge_patch(int cell) const {
  const CellKey& key = active_.at(cell);
  const std::int64_t s = lattice_scale(key.level);
  const std::int64_t h = s / 2;
  const std::int64_t x0 = key.i * s, y0 = key.j * s;
  // Edge end points on the closed boundary of a cell are its corners and,
  // at hanging nodes, its side midpoints.
  const std::int64_t probes[8][2] = {{x0, y0},         {x0 + s, y0},     {x0, y0 + s},
                                     {x0 + s, y0 + s}, {x0 + h, y0},     {x0 + h, y0 + s},
                                     {x0, y0 + h},     {x0 + s, y0 + h}};
  std::vector<int> out;
  for (const auto& p : probes) {
    const auto it = vertex_edges_.find(pack(p[0], p[1]));
    if (it == vertex_edges_.end()) continue;
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void MeshForest::refine(std::span<const int> cells) {
  std::vector<int> sorted(cells.begin(), cells.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.empty()) return;

  std::deque<CellKey> queue;
  for (int c : sorted) queue.push_back(active_.at(c));
  while (!queue.empty()) {
    const CellKey key = queue.front();
    queue.pop_front();
    if (!is_active(key)) continue;
    if (key.level >= kMaxLevel) throw std::runtime_error("MeshForest::refine: maximum level reached");
    refined_.insert(key);
    // The children sit at level L+1; any leaf across the parent's sides
    // coarser than L must be split as well.
    for (Side side : kSides) {
      const CellKey nk = neighbor_key(key, side);
      if (!in_range(nk)) continue;
      const CellKey leaf = covering(nk);
      if (leaf.level < key.level) queue.push_back(leaf);
    }
  }
  rebuild();
}

void MeshForest::coarsen(std::span<const int> cells) {
  std::vector<int> distinct(cells.begin(), cells.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::map<CellKey, int> marked_children;
  for (int c : distinct) {
    const CellKey& key = active_.at(c);
    if (key.level > 0) ++marked_children[key.parent()];
  }

  bool changed = false;
  for (const auto& [parent, count] : marked_children) {
    if (count != 4) continue;
    bool family_active = true;
    for (int c = 0; c < 4; ++c) family_active = family_active && is_active(parent.child(c));
    if (!family_active) continue;
    // After the merge the parent (level L) must not touch cells of level L+2.
    bool allowed = true;
    for (Side side : kSides) {
      const CellKey nk = neighbor_key(parent, side);
      if (!in_range(nk) || !refined_.contains(nk)) continue;
      for (int c = 0; c < 4 && allowed; ++c) {
        const CellKey ch = nk.child(c);
        const bool faces_parent = (side == Side::West && (ch.i & 1) == 1) ||
                                  (side == Side::East && (ch.i & 1) == 0) ||
                                  (side == Side::South && (ch.j & 1) == 1) ||
                                  (side == Side::North && (ch.j & 1) == 0);
        if (faces_parent && refined_.contains(ch)) allowed = false;
      }
    }
    if (!allowed) continue;
    refined_.erase(parent);
    changed = true;
  }
  if (changed) rebuild();
}

MeshForest MeshForest::refined(std::span<const int> cells) const {
  MeshForest copy = *this;
  copy.refine(cells);
  return copy;
}

MeshForest MeshForest::coarsened(std::span<const int> cells) const {
  MeshForest copy = *this;
  copy.coarsen(cells);
  return copy;
}

bool MeshForest::is_one_irregular() const {
  for (const CellKey& key : active_) {
    for (Side side : kSides) {
      const CellKey nk = neighbor_key(key, side);
      if (!in_range(nk)) continue;
      if (!exists(nk)) {
        if (covering(nk).level < key.level - 1) return false;
        continue;
      }
      if (!refined_.contains(nk)) continue;
      for (int c = 0; c < 4; ++c) {
        const CellKey ch = nk.child(c);
        if (refined_.contains(ch)) {
          const bool faces = (side == Side::West && (ch.i & 1) == 1) ||
                             (side == Side::East && (ch.i & 1) == 0) ||
                             (side == Side::South && (ch.j & 1) == 1) ||
                             (side == Side::North && (ch.j & 1) == 0);
          if (faces) return false;
        }
      }
    }
  }
  return true;
}

double MeshForest::total_area() const {
  double a = 0.0;
  for (const CellKey& k : active_) a += box(k).area();
  return a;
}

std::string MeshForest::to_text() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# quadtree-mesh domain " << domain_.x0 << ' ' << domain_.x1 << ' ' << domain_.y0 << ' '
      << domain_.y1 << " grid " << nx_ << ' ' << ny_ << " cells " << active_.size() << '\n';
  for (const CellKey& k : active_) {
    const Box b = box(k);
    out << k.level << ' ' << k.i << ' ' << k.j << ' ' << b.x0 << ' ' << b.y0 << ' ' << b.x1 << ' '
        << b.y1 << '\n';
  }
  return out.str();
}

MeshForest MeshForest::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string hash, tag, word;
  Box d;
  int nx = 0, ny = 0;
  std::size_t count = 0;
  in >> hash >> tag >> word >> d.x0 >> d.x1 >> d.y0 >> d.y1 >> word >> nx >> ny >> word >> count;
  if (!in || hash != "#" || tag != "quadtree-mesh") throw std::invalid_argument("mesh text: bad header");
  MeshForest mesh(d, nx, ny);
  std::unordered_set<CellKey, CellKeyHash> refined;
  std::vector<CellKey> cells;
  for (std::size_t c = 0; c < count; ++c) {
    CellKey k;
    double bx0, by0, bx1, by1;
    in >> k.level >> k.i >> k.j >> bx0 >> by0 >> bx1 >> by1;
    if (!in) throw std::invalid_argument("mesh text: truncated cell list");
    cells.push_back(k);
    for (CellKey p = k; p.level > 0;) {
      p = p.parent();
      refined.insert(p);
    }
  }
  mesh = mesh.with_refined(std::move(refined));
  if (mesh.num_active() != count) throw std::invalid_argument("mesh text: cells do not form a partition");
  for (const CellKey& k : cells)
    if (mesh.index_of(k) < 0) throw std::invalid_argument("mesh text: cells do not form a partition");
  return mesh;
}

MeshForest MeshForest::with_refined(std::unordered_set<CellKey, CellKeyHash> refined) const {
  MeshForest copy(domain_, nx_, ny_);
  copy.refined_ = std::move(refined);
  copy.rebuild();
  return copy;
}

bool MeshForest::operator==(const MeshForest& other) const {
  return domain_.x0 == other.domain_.x0 && domain_.x1 == other.domain_.x1 &&
         domain_.y0 == other.domain_.y0 && domain_.y1 == other.domain_.y1 && nx_ == other.nx_ &&
         ny_ == other.ny_ && refined_ == other.refined_;
}

int active_ancestor(const MeshForest& mesh, CellKey key) {
  while (true) {
    const int idx = mesh.index_of(key);
    if (idx >= 0) return idx;
    if (key.level == 0) return -1;
    key = key.parent();
  }
}

CommonRefinement common_refinement(const MeshForest& a, const MeshForest& b) {
  if (a.root_nx() != b.root_nx() || a.root_ny() != b.root_ny())
    throw std::invalid_argument("common_refinement: meshes from different forests");
  std::unordered_set<CellKey, CellKeyHash> refined = a.refined_nodes();
  refined.insert(b.refined_nodes().begin(), b.refined_nodes().end());
  CommonRefinement result{a.with_refined(std::move(refined)), {}, {}};
  const auto cells = result.overlay.active();
  result.ancestor_a.resize(cells.size());
  result.ancestor_b.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    result.ancestor_a[c] = active_ancestor(a, cells[c]);
    result.ancestor_b[c] = active_ancestor(b, cells[c]);
  }
  return result;
}

}  // namespace blowup
