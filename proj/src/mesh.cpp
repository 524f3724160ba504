#include "vemflow/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include "vemflow/errors.hpp"
#include "vemflow/log.hpp"
#include "vemflow/quadrature.hpp"

namespace vemflow {
namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = cross(p2 - p1, q1 - p1);
  const double d2 = cross(p2 - p1, q2 - p1);
  const double d3 = cross(q2 - q1, p1 - q1);
  const double d4 = cross(q2 - q1, p2 - q1);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

bool point_in_polygon(std::span<const Vec2> poly, const Vec2& x, double tol) {
  const std::size_t n = poly.size();
  // On-boundary test first so boundary points count as inside.
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = std::clamp((x - a).dot(ab) / len2, 0.0, 1.0);
    if ((a + t * ab - x).norm() <= tol) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& pi = poly[i];
    const Vec2& pj = poly[j];
    if ((pi.y() > x.y()) != (pj.y() > x.y())) {
      const double xc = pj.x() + (x.y() - pj.y()) * (pi.x() - pj.x()) / (pi.y() - pj.y());
      if (x.x() < xc) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

PolygonGeometry polygon_geometry(std::span<const Vec2> vertices) {
  const std::size_t n = vertices.size();
  if (n < 3) throw InvalidMesh("polygon needs at least three vertices");
  double diameter = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      diameter = std::max(diameter, (vertices[i] - vertices[j]).norm());
  if (!(diameter > 0.0)) throw InvalidMesh("polygon has zero diameter");

  // Shoelace relative to the first vertex to limit cancellation.
  const Vec2 o = vertices[0];
  double area2 = 0.0;
  Vec2 moment = Vec2::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = vertices[i] - o;
    const Vec2 b = vertices[(i + 1) % n] - o;
    const double w = cross(a, b);
    area2 += w;
    moment += w * (a + b);
  }
  const double area = 0.5 * area2;
  if (!(area > 1e-14 * diameter * diameter))
    throw InvalidMesh("polygon is degenerate or clockwise (area " + std::to_string(area) + ")");
  PolygonGeometry g;
  g.area = area;
  g.centroid = o + moment / (3.0 * area2);
  g.diameter = diameter;
  return g;
}

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::vector<int>> cells)
    : vertices_(std::move(vertices)), cells_(std::move(cells)) {
  if (cells_.empty()) throw InvalidMesh("mesh has no cells");
  const int nv = num_vertices();

  bounds_ = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
             std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
  for (const Vec2& v : vertices_) {
    if (!std::isfinite(v.x()) || !std::isfinite(v.y())) throw InvalidMesh("non-finite vertex");
    bounds_.xmin = std::min(bounds_.xmin, v.x());
    bounds_.ymin = std::min(bounds_.ymin, v.y());
    bounds_.xmax = std::max(bounds_.xmax, v.x());
    bounds_.ymax = std::max(bounds_.ymax, v.y());
  }
  const double length_scale = std::max(bounds_.width(), bounds_.height());

  std::map<std::pair<int, int>, int> edge_index;
  cell_edges_.resize(cells_.size());
  geometry_.reserve(cells_.size());
  for (int c = 0; c < num_cells(); ++c) {
    const auto& loop = cells_[c];
    const int n = static_cast<int>(loop.size());
    if (n < 3) throw InvalidMesh("cell " + std::to_string(c) + " has fewer than 3 vertices");
    for (int v : loop)
      if (v < 0 || v >= nv) throw InvalidMesh("cell " + std::to_string(c) + " references a missing vertex");
    std::vector<int> sorted = loop;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InvalidMesh("cell " + std::to_string(c) + " repeats a vertex");

    const std::vector<Vec2> poly = cell_vertices(c);
    try {
      geometry_.push_back(polygon_geometry(poly));
    } catch (const InvalidMesh& e) {
      throw InvalidMesh("cell " + std::to_string(c) + ": " + e.what());
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]))
          throw InvalidMesh("cell " + std::to_string(c) + " is not simple");
      }

    cell_edges_[c].resize(n);
    for (int i = 0; i < n; ++i) {
      const int a = loop[i];
      const int b = loop[(i + 1) % n];
      if ((vertices_[a] - vertices_[b]).norm() <= 1e-14 * length_scale)
        throw InvalidMesh("cell " + std::to_string(c) + " has a zero-length edge");
      const auto key = std::minmax(a, b);
      auto it = edge_index.find(key);
      if (it == edge_index.end()) {
        edge_index.emplace(key, num_edges());
        cell_edges_[c][i] = num_edges();
        edges_.push_back({a, b, c, -1});
      } else {
        Edge& e = edges_[it->second];
        if (e.right >= 0) throw InvalidMesh("edge shared by more than two cells");
        if (e.v0 != b || e.v1 != a)
          throw InvalidMesh("cells " + std::to_string(e.left) + " and " + std::to_string(c) +
                            " traverse a shared edge in the same direction");
        e.right = c;
        cell_edges_[c][i] = it->second;
      }
    }
  }

  vertex_boundary_.assign(nv, 0);
  domain_area_ = 0.0;
  for (const Edge& e : edges_) {
    if (!e.on_boundary()) continue;
    vertex_boundary_[e.v0] = vertex_boundary_[e.v1] = 1;
    domain_area_ += 0.5 * cross(vertices_[e.v0] - vertices_[0], vertices_[e.v1] - vertices_[0]);
  }
  double area_sum = 0.0;
  h_ = 0.0;
  for (const auto& g : geometry_) {
    area_sum += g.area;
    h_ = std::max(h_, g.diameter);
  }
  if (std::abs(area_sum - domain_area_) > 1e-12 * domain_area_)
    throw InvalidMesh("cell areas do not add up to the enclosed domain area");
}

bool Mesh::cell_edge_reversed(int c, int i) const {
  const Edge& e = edges_[cell_edges_[c][i]];
  return e.v0 != cells_[c][i];
}

std::vector<Vec2> Mesh::cell_vertices(int c) const {
  std::vector<Vec2> out;
  out.reserve(cells_[c].size());
  for (int v : cells_[c]) out.push_back(vertices_[v]);
  return out;
}

double Mesh::edge_length(int e) const {
  return (vertices_[edges_[e].v1] - vertices_[edges_[e].v0]).norm();
}

int Mesh::locate(const Vec2& x) const {
  const double tol = 1e-12 * std::max(bounds_.width(), bounds_.height());
  for (int c = 0; c < num_cells(); ++c) {
    const auto& g = geometry_[c];
    if ((x - g.centroid).norm() > g.diameter + tol) continue;
    const auto poly = cell_vertices(c);
    if (point_in_polygon(poly, x, tol)) return c;
  }
  return -1;
}

Mesh build_cartesian(int nx, int ny, const Rect& bounds) {
  if (nx < 1 || ny < 1) throw InvalidInput("build_cartesian: nx and ny must be positive");
  if (bounds.degenerate()) throw InvalidInput("build_cartesian: degenerate bounds");
  std::vector<Vec2> vertices;
  vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    const double y = j == ny ? bounds.ymax : bounds.ymin + bounds.height() * j / ny;
    for (int i = 0; i <= nx; ++i) {
      const double x = i == nx ? bounds.xmax : bounds.xmin + bounds.width() * i / nx;
      vertices.emplace_back(x, y);
    }
  }
  std::vector<std::vector<int>> cells;
  cells.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int v = j * (nx + 1) + i;
      cells.push_back({v, v + 1, v + nx + 2, v + nx + 1});
    }
  return Mesh(std::move(vertices), std::move(cells));
}

namespace {

// Keeps the part of a convex polygon with (x - m) . d <= 0.
std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& poly, const Vec2& m, const Vec2& d) {
  std::vector<Vec2> out;
  out.reserve(poly.size() + 1);
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const double fa = (a - m).dot(d);
    const double fb = (b - m).dot(d);
    if (fa <= 0) out.push_back(a);
    if ((fa < 0 && fb > 0) || (fa > 0 && fb < 0)) {
      const double t = fa / (fa - fb);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

struct SeedGrid {
  Rect bounds;
  int nx = 1, ny = 1;
  double cs = 1.0;
  std::vector<std::vector<int>> buckets;

  SeedGrid(const std::vector<Vec2>& seeds, const Rect& b) : bounds(b) {
    const double n = static_cast<double>(seeds.size());
    cs = std::sqrt(b.area() / std::max(1.0, n));
    nx = std::max(1, static_cast<int>(std::ceil(b.width() / cs)));
    ny = std::max(1, static_cast<int>(std::ceil(b.height() / cs)));
    buckets.resize(static_cast<std::size_t>(nx) * ny);
    for (int i = 0; i < static_cast<int>(seeds.size()); ++i) {
      const auto [bx, by] = bucket_of(seeds[i]);
      buckets[by * nx + bx].push_back(i);
    }
  }
  std::pair<int, int> bucket_of(const Vec2& p) const {
    int bx = static_cast<int>((p.x() - bounds.xmin) / cs);
    int by = static_cast<int>((p.y() - bounds.ymin) / cs);
    return {std::clamp(bx, 0, nx - 1), std::clamp(by, 0, ny - 1)};
  }
};

std::vector<std::vector<Vec2>> voronoi_polygons(const std::vector<Vec2>& seeds, const Rect& b) {
  const SeedGrid grid(seeds, b);
  const std::vector<Vec2> box = {{b.xmin, b.ymin}, {b.xmax, b.ymin}, {b.xmax, b.ymax}, {b.xmin, b.ymax}};
  std::vector<std::vector<Vec2>> polys(seeds.size());
  const int max_ring = std::max(grid.nx, grid.ny);
  for (int i = 0; i < static_cast<int>(seeds.size()); ++i) {
    const Vec2& s = seeds[i];
    std::vector<Vec2> poly = box;
    const auto [bx, by] = grid.bucket_of(s);
    for (int r = 0; r <= max_ring; ++r) {
      for (int gy = by - r; gy <= by + r; ++gy) {
        if (gy < 0 || gy >= grid.ny) continue;
        for (int gx = bx - r; gx <= bx + r; ++gx) {
          if (gx < 0 || gx >= grid.nx) continue;
          if (std::max(std::abs(gx - bx), std::abs(gy - by)) != r) continue;
          for (int j : grid.buckets[gy * grid.nx + gx]) {
            if (j == i) continue;
            const Vec2 d = seeds[j] - s;
            if (d.squaredNorm() == 0.0) throw InvalidMesh("coincident Voronoi seeds");
            poly = clip_halfplane(poly, 0.5 * (s + seeds[j]), d);
          }
        }
      }
      // Seeds beyond ring r are at least r*cs away; they cannot clip once
      // every vertex lies within half that distance.
      double reach = 0.0;
      for (const Vec2& p : poly) reach = std::max(reach, (p - s).norm());
      if (r * grid.cs >= 2.0 * reach) break;
    }
    polys[i] = std::move(poly);
  }
  return polys;
}

// Merges vertices closer than tol (transitively) and rebuilds index loops.
Mesh weld(const std::vector<std::vector<Vec2>>& polys, const Rect& b) {
  const double tol = 1e-10 * std::max(b.width(), b.height());
  std::vector<Vec2> pts;
  std::vector<std::vector<int>> raw(polys.size());
  for (std::size_t c = 0; c < polys.size(); ++c)
    for (const Vec2& p : polys[c]) {
      raw[c].push_back(static_cast<int>(pts.size()));
      pts.push_back(p);
    }

  std::vector<int> parent(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) parent[i] = static_cast<int>(i);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  auto key = [&](long long ix, long long iy) { return ix * 1000003LL + iy; };
  std::unordered_map<long long, std::vector<int>> hash;
  const double cell = 4.0 * tol;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
    const long long ix = static_cast<long long>(std::floor(pts[i].x() / cell));
    const long long iy = static_cast<long long>(std::floor(pts[i].y() / cell));
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy) {
        auto it = hash.find(key(ix + dx, iy + dy));
        if (it == hash.end()) continue;
        for (int j : it->second)
          if ((pts[i] - pts[j]).norm() <= tol) {
            const int ri = find(i), rj = find(j);
            if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
          }
      }
    hash[key(ix, iy)].push_back(i);
  }

  std::vector<int> index(pts.size(), -1);
  std::vector<Vec2> vertices;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
    const int r = find(i);
    if (index[r] < 0) {
      index[r] = static_cast<int>(vertices.size());
      Vec2 p = pts[r];
      // Snap to the box so boundary edges stay exactly on it.
      if (std::abs(p.x() - b.xmin) <= tol) p.x() = b.xmin;
      if (std::abs(p.x() - b.xmax) <= tol) p.x() = b.xmax;
      if (std::abs(p.y() - b.ymin) <= tol) p.y() = b.ymin;
      if (std::abs(p.y() - b.ymax) <= tol) p.y() = b.ymax;
      vertices.push_back(p);
    }
  }
  std::vector<std::vector<int>> cells;
  cells.reserve(polys.size());
  for (const auto& loop : raw) {
    std::vector<int> cell;
    for (int i : loop) {
      const int v = index[find(i)];
      if (cell.empty() || cell.back() != v) cell.push_back(v);
    }
    while (cell.size() > 1 && cell.front() == cell.back()) cell.pop_back();
    if (cell.size() < 3) throw InvalidMesh("Voronoi cell collapsed after welding");
    cells.push_back(std::move(cell));
  }
  return Mesh(std::move(vertices), std::move(cells));
}

// Collapses edges shorter than `ratio` times the diameter of an adjacent cell.
// Lloyd relaxation alone leaves near-cocircular seed groups with tiny edges;
// merging their endpoints keeps every cell convex up to O(short edge) and
// restores the edge-length bound. Box corners and boundary vertices keep
// their positions.
Mesh collapse_short_edges(Mesh mesh, const Rect& b, double ratio) {
  auto is_corner = [&](const Vec2& p) {
    return (p.x() == b.xmin || p.x() == b.xmax) && (p.y() == b.ymin || p.y() == b.ymax);
  };
  for (int pass = 0; pass < 20; ++pass) {
    struct Candidate {
      double r;
      int e;
    };
    std::vector<Candidate> short_edges;
    for (int e = 0; e < mesh.num_edges(); ++e) {
      const Edge& ed = mesh.edge(e);
      double h = mesh.geometry(ed.left).diameter;
      if (!ed.on_boundary()) h = std::min(h, mesh.geometry(ed.right).diameter);
      const double r = mesh.edge_length(e) / h;
      if (r < ratio) short_edges.push_back({r, e});
    }
    if (short_edges.empty()) return mesh;
    std::sort(short_edges.begin(), short_edges.end(),
              [](const Candidate& x, const Candidate& y) { return x.r < y.r || (x.r == y.r && x.e < y.e); });

    std::vector<Vec2> pos = mesh.vertices();
    std::vector<int> target(pos.size());
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = static_cast<int>(i);
    std::vector<std::uint8_t> touched(pos.size(), 0);
    std::vector<std::uint8_t> cell_touched(mesh.num_cells(), 0);
    int merges = 0;
    for (const Candidate& cand : short_edges) {
      const Edge& ed = mesh.edge(cand.e);
      const int a = ed.v0, c = ed.v1;
      if (touched[a] || touched[c]) continue;
      if (mesh.cell(ed.left).size() < 4 || cell_touched[ed.left]) continue;
      if (!ed.on_boundary() && (mesh.cell(ed.right).size() < 4 || cell_touched[ed.right])) continue;
      const bool ca = is_corner(pos[a]), cc = is_corner(pos[c]);
      const bool ba = mesh.vertex_on_boundary(a), bc = mesh.vertex_on_boundary(c);
      Vec2 p;
      if (ca && cc) continue;
      if (ca || cc) {
        p = ca ? pos[a] : pos[c];
      } else if (ba && bc) {
        if (!ed.on_boundary()) continue;
        p = 0.5 * (pos[a] + pos[c]);
      } else if (ba || bc) {
        p = ba ? pos[a] : pos[c];
      } else {
        p = 0.5 * (pos[a] + pos[c]);
      }
      pos[a] = p;
      target[c] = a;
      touched[a] = touched[c] = 1;
      cell_touched[ed.left] = 1;
      if (!ed.on_boundary()) cell_touched[ed.right] = 1;
      ++merges;
    }
    if (merges == 0) return mesh;

    std::vector<int> index(pos.size(), -1);
    std::vector<Vec2> vertices;
    for (std::size_t i = 0; i < pos.size(); ++i)
      if (target[i] == static_cast<int>(i)) {
        index[i] = static_cast<int>(vertices.size());
        vertices.push_back(pos[i]);
      }
    std::vector<std::vector<int>> cells;
    for (const auto& loop : mesh.cells()) {
      std::vector<int> cell;
      for (int v : loop) {
        const int w = index[target[v]];
        if (cell.empty() || cell.back() != w) cell.push_back(w);
      }
      while (cell.size() > 1 && cell.front() == cell.back()) cell.pop_back();
      cells.push_back(std::move(cell));
    }
    mesh = Mesh(std::move(vertices), std::move(cells));
  }
  return mesh;
}

}  // namespace

Mesh voronoi_from_seeds(const std::vector<Vec2>& seeds, const Rect& bounds) {
  if (seeds.empty()) throw InvalidInput("voronoi: no seeds");
  if (bounds.degenerate()) throw InvalidInput("voronoi: degenerate bounds");
  return weld(voronoi_polygons(seeds, bounds), bounds);
}

Mesh build_voronoi(int n_cells, const Rect& bounds, std::uint64_t rng_seed, int lloyd_iterations) {
  if (n_cells < 1) throw InvalidInput("build_voronoi: n_cells must be positive");
  if (lloyd_iterations < 0) throw InvalidInput("build_voronoi: negative Lloyd iteration count");
  if (bounds.degenerate()) throw InvalidInput("build_voronoi: degenerate bounds");
  std::mt19937_64 rng(rng_seed);
  // Mantissa-exact uniform draws keep the generator bit-reproducible across
  // standard library implementations.
  auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<Vec2> seeds(n_cells);
  for (Vec2& s : seeds) s = {bounds.xmin + bounds.width() * uniform(), bounds.ymin + bounds.height() * uniform()};

  const double jitter = 1e-6 * std::sqrt(bounds.area() / n_cells);
  constexpr int kMaxAttempts = 8;
  constexpr double kShortEdgeRatio = 0.1;
  for (int attempt = 0;; ++attempt) {
    try {
      Mesh mesh = voronoi_from_seeds(seeds, bounds);
      for (int it = 0; it < lloyd_iterations; ++it) {
        for (int c = 0; c < n_cells; ++c) seeds[c] = mesh.geometry(c).centroid;
        mesh = voronoi_from_seeds(seeds, bounds);
      }
      mesh = collapse_short_edges(std::move(mesh), bounds, kShortEdgeRatio);
      if (mesh.num_cells() != n_cells)
        throw InvalidMesh("Voronoi generation produced " + std::to_string(mesh.num_cells()) + " cells");
      return mesh;
    } catch (const InvalidMesh& e) {
      if (attempt + 1 >= kMaxAttempts)
        throw InvalidMesh(std::string("build_voronoi: could not produce ") + std::to_string(n_cells) +
                          " cells: " + e.what());
      log_warning(std::string("build_voronoi: regenerating with perturbed seeds: ") + e.what());
      for (Vec2& s : seeds) {
        s.x() = std::clamp(s.x() + jitter * (2.0 * uniform() - 1.0), bounds.xmin, bounds.xmax);
        s.y() = std::clamp(s.y() + jitter * (2.0 * uniform() - 1.0), bounds.ymin, bounds.ymax);
      }
    }
  }
}

PolygonGeometry cell_geometry(const Mesh& mesh, int cell) {
  if (cell < 0 || cell >= mesh.num_cells()) throw InvalidInput("cell index out of range");
  return mesh.geometry(cell);
}

double integrate_scaled_monomial(std::span<const Vec2> polygon, const Vec2& center, double scale,
                                 int a1, int a2) {
  if (a1 < 0 || a2 < 0) throw InvalidInput("negative monomial exponent");
  const int d = a1 + a2;
  // m is homogeneous of degree d in (x - center), so by Euler's identity
  // div(m (x - center)) = (d + 2) m and the integral becomes a boundary sum.
  const Rule1D rule = gauss_legendre((d + 1 + 1) / 2 + 1);
  const std::size_t n = polygon.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = (polygon[i] - center) / scale;
    const Vec2 b = (polygon[(i + 1) % n] - center) / scale;
    const Vec2 t = b - a;
    // (x - c) . n |e| in scaled coordinates, constant along the edge.
    const double flux = cross(a, b);
    double edge_sum = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 p = a + rule.nodes[q] * t;
      edge_sum += rule.weights[q] * std::pow(p.x(), a1) * std::pow(p.y(), a2);
    }
    total += flux * edge_sum;
  }
  return total * scale * scale / (d + 2);
}

double integrate_scaled_monomial(const Mesh& mesh, int cell, int a1, int a2) {
  const auto& g = cell_geometry(mesh, cell);
  const auto poly = mesh.cell_vertices(cell);
  return integrate_scaled_monomial(poly, g.centroid, g.diameter, a1, a2);
}

namespace {

std::vector<std::array<Vec2, 3>> ear_clip(std::span<const Vec2> poly) {
  std::vector<int> idx(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) idx[i] = static_cast<int>(i);
  std::vector<std::array<Vec2, 3>> tris;
  const double scale = polygon_geometry(poly).diameter;
  const double eps = 1e-14 * scale * scale;
  while (idx.size() > 3) {
    bool clipped = false;
    const std::size_t n = idx.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& a = poly[idx[(i + n - 1) % n]];
      const Vec2& b = poly[idx[i]];
      const Vec2& c = poly[idx[(i + 1) % n]];
      if (cross(b - a, c - a) <= eps) continue;
      bool contains = false;
      for (std::size_t j = 0; j < n && !contains; ++j) {
        if (j == i || j == (i + n - 1) % n || j == (i + 1) % n) continue;
        const Vec2& p = poly[idx[j]];
        contains = cross(b - a, p - a) >= 0 && cross(c - b, p - b) >= 0 && cross(a - c, p - c) >= 0;
      }
      if (contains) continue;
      tris.push_back({a, b, c});
      idx.erase(idx.begin() + static_cast<long>(i));
      clipped = true;
      break;
    }
    if (!clipped) throw InvalidMesh("ear clipping failed: polygon is not simple");
  }
  tris.push_back({poly[idx[0]], poly[idx[1]], poly[idx[2]]});
  return tris;
}

}  // namespace

std::vector<QuadraturePoint> quadrature_points(std::span<const Vec2> polygon, int order) {
  if (order < 1) throw InvalidInput("quadrature order must be at least 1");
  const PolygonGeometry g = polygon_geometry(polygon);
  const std::size_t n = polygon.size();
  std::vector<std::array<Vec2, 3>> tris;
  bool fan_ok = true;
  for (std::size_t i = 0; i < n && fan_ok; ++i)
    fan_ok = cross(polygon[i] - g.centroid, polygon[(i + 1) % n] - g.centroid) >
             1e-12 * g.diameter * g.diameter;
  if (fan_ok) {
    for (std::size_t i = 0; i < n; ++i) tris.push_back({g.centroid, polygon[i], polygon[(i + 1) % n]});
  } else {
    tris = ear_clip(polygon);
  }
  const TriangleRule& rule = triangle_rule(order);
  std::vector<QuadraturePoint> out;
  out.reserve(tris.size() * rule.points.size());
  for (const auto& t : tris) {
    const Vec2 e1 = t[1] - t[0];
    const Vec2 e2 = t[2] - t[0];
    const double jac = cross(e1, e2);
    for (std::size_t q = 0; q < rule.points.size(); ++q)
      out.push_back({t[0] + rule.points[q].x() * e1 + rule.points[q].y() * e2, rule.weights[q] * jac});
  }
  return out;
}

std::vector<QuadraturePoint> quadrature_points(const Mesh& mesh, int cell, int order) {
  if (cell < 0 || cell >= mesh.num_cells()) throw InvalidInput("cell index out of range");
  const auto poly = mesh.cell_vertices(cell);
  return quadrature_points(poly, order);
}

double kernel_inradius(std::span<const Vec2> polygon) {
  // Chebyshev centre of the intersection of the inner half-planes: a
  // three-variable LP whose optimum sits where three constraints are active.
  const std::size_t n = polygon.size();
  std::vector<Vec2> normal(n);
  std::vector<double> offset(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 d = polygon[(i + 1) % n] - polygon[i];
    normal[i] = Vec2(-d.y(), d.x()) / d.norm();
    offset[i] = normal[i].dot(polygon[i]);
  }
  const double scale = polygon_geometry(polygon).diameter;
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        Eigen::Matrix3d a;
        Eigen::Vector3d b;
        const std::array<std::size_t, 3> ids = {i, j, k};
        for (int r = 0; r < 3; ++r) {
          a(r, 0) = normal[ids[r]].x();
          a(r, 1) = normal[ids[r]].y();
          a(r, 2) = -1.0;
          b(r) = offset[ids[r]];
        }
        if (std::abs(a.determinant()) < 1e-12) continue;
        const Eigen::Vector3d sol = a.fullPivLu().solve(b);
        const double r = sol(2);
        if (r <= best) continue;
        const Vec2 x(sol(0), sol(1));
        bool feasible = true;
        for (std::size_t l = 0; l < n && feasible; ++l)
          feasible = normal[l].dot(x) - offset[l] >= r - 1e-12 * scale;
        if (feasible) best = r;
      }
  return best;
}

MeshQuality check_assumptions(const Mesh& mesh, double rho0, double rho1) {
  MeshQuality q;
  q.rho0 = rho0;
  q.rho1 = rho1;
  q.h = mesh.h();
  q.min_star_ratio = std::numeric_limits<double>::max();
  q.min_edge_ratio = std::numeric_limits<double>::max();
  double min_h = std::numeric_limits<double>::max();
  q.cells.reserve(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& g = mesh.geometry(c);
    const auto poly = mesh.cell_vertices(c);
    CellQuality cq;
    cq.diameter = g.diameter;
    cq.area = g.area;
    cq.centroid = g.centroid;
    cq.star_ratio = kernel_inradius(poly) / g.diameter;
    double min_edge = std::numeric_limits<double>::max();
    for (int e : mesh.cell_edges(c)) min_edge = std::min(min_edge, mesh.edge_length(e));
    cq.edge_ratio = min_edge / g.diameter;
    q.min_star_ratio = std::min(q.min_star_ratio, cq.star_ratio);
    q.min_edge_ratio = std::min(q.min_edge_ratio, cq.edge_ratio);
    min_h = std::min(min_h, g.diameter);
    q.cells.push_back(cq);
  }
  q.min_size_ratio = min_h / q.h;
  q.d1 = q.min_star_ratio >= rho0;
  q.d2 = q.min_edge_ratio >= rho0;
  q.d3 = q.min_size_ratio >= rho1;
  return q;
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(17);
  s << "polymesh 1\n";
  s << "V " << mesh.num_vertices() << '\n';
  for (const Vec2& v : mesh.vertices()) s << v.x() << ' ' << v.y() << '\n';
  s << "C " << mesh.num_cells() << '\n';
  for (const auto& loop : mesh.cells()) {
    s << loop.size();
    for (int v : loop) s << ' ' << v;
    s << '\n';
  }
  out << s.str();
}

Mesh read_mesh(std::istream& in) {
  std::string word;
  int version = 0;
  in.imbue(std::locale::classic());
  if (!(in >> word >> version) || word != "polymesh" || version != 1)
    throw InvalidInput("mesh file: expected header 'polymesh 1'");
  long long count = 0;
  if (!(in >> word >> count) || word != "V" || count < 0) throw InvalidInput("mesh file: expected 'V <count>'");
  std::vector<Vec2> vertices(static_cast<std::size_t>(count));
  for (auto& v : vertices)
    if (!(in >> v.x() >> v.y())) throw InvalidInput("mesh file: truncated vertex list");
  if (!(in >> word >> count) || word != "C" || count < 0) throw InvalidInput("mesh file: expected 'C <count>'");
  std::vector<std::vector<int>> cells(static_cast<std::size_t>(count));
  for (auto& loop : cells) {
    int n = 0;
    if (!(in >> n) || n < 3) throw InvalidInput("mesh file: bad cell vertex count");
    loop.resize(n);
    for (int& v : loop)
      if (!(in >> v)) throw InvalidInput("mesh file: truncated cell list");
  }
  return Mesh(std::move(vertices), std::move(cells));
}

void write_mesh_file(const std::string& path, const Mesh& mesh) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open '" + path + "' for writing");
  write_mesh(f, mesh);
  if (!f) throw InvalidInput("write to '" + path + "' failed");
}

Mesh read_mesh_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open '" + path + "'");
  return read_mesh(f);
}

}  // namespace vemflow
