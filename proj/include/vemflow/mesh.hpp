#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vemflow/types.hpp"

namespace vemflow {

/// Edge of a polygonal mesh. The edge is oriented so that `left` traverses it
/// from v0 to v1 (counter-clockwise); `right` is -1 on the boundary.
struct Edge {
  int v0 = -1;
  int v1 = -1;
  int left = -1;
  int right = -1;

  bool on_boundary() const { return right < 0; }
};

struct PolygonGeometry {
  double area = 0.0;
  Vec2 centroid = Vec2::Zero();
  double diameter = 0.0;
};

/// Area, centroid (shoelace) and diameter (max vertex distance) of a simple
/// polygon given counter-clockwise. Throws InvalidMesh for degenerate input
/// (fewer than three vertices, non-positive or vanishing area).
PolygonGeometry polygon_geometry(std::span<const Vec2> vertices);

/// Immutable polygonal decomposition of a planar domain.
///
/// Construction validates the invariants every downstream operator relies on:
/// simple counter-clockwise cells with positive area, no zero-length edges,
/// every interior edge shared by exactly two cells traversing it in opposite
/// directions, and every boundary edge owned by exactly one cell.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<Vec2> vertices, std::vector<std::vector<int>> cells);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Vec2& vertex(int v) const { return vertices_[v]; }
  const std::vector<std::vector<int>>& cells() const { return cells_; }
  const std::vector<int>& cell(int c) const { return cells_[c]; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_[e]; }

  /// Global edge index of local edge i (from cell(c)[i] to cell(c)[i+1]).
  const std::vector<int>& cell_edges(int c) const { return cell_edges_[c]; }
  /// True when local edge i of cell c runs against the global edge direction.
  bool cell_edge_reversed(int c, int i) const;

  bool vertex_on_boundary(int v) const { return vertex_boundary_[v] != 0; }
  const PolygonGeometry& geometry(int c) const { return geometry_[c]; }
  std::vector<Vec2> cell_vertices(int c) const;

  /// Bounding box of all vertices.
  const Rect& bounds() const { return bounds_; }
  /// Area enclosed by the boundary edges.
  double domain_area() const { return domain_area_; }
  /// Largest cell diameter.
  double h() const { return h_; }

  double edge_length(int e) const;
  /// Index of the lowest-numbered cell containing x (boundary inclusive), -1
  /// when no cell does.
  int locate(const Vec2& x) const;

 private:
  std::vector<Vec2> vertices_;
  std::vector<std::vector<int>> cells_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> cell_edges_;
  std::vector<std::uint8_t> vertex_boundary_;
  std::vector<PolygonGeometry> geometry_;
  Rect bounds_;
  double domain_area_ = 0.0;
  double h_ = 0.0;
};

/// Regular nx-by-ny grid of rectangles.
Mesh build_cartesian(int nx, int ny, const Rect& bounds);

/// Voronoi diagram of n_cells random seeds clipped to `bounds`, followed by
/// `lloyd_iterations` centroidal relaxations; edges shorter than a tenth of an
/// adjacent cell diameter are then collapsed. Deterministic for a given seed.
Mesh build_voronoi(int n_cells, const Rect& bounds, std::uint64_t rng_seed,
                   int lloyd_iterations = 3);

/// Voronoi cells of the given seeds clipped to `bounds` (no relaxation).
Mesh voronoi_from_seeds(const std::vector<Vec2>& seeds, const Rect& bounds);

PolygonGeometry cell_geometry(const Mesh& mesh, int cell);

/// Exact integral over the cell of ((x - x_E)/h_E)^a1 ((y - y_E)/h_E)^a2,
/// with x_E the centroid and h_E the diameter.
double integrate_scaled_monomial(const Mesh& mesh, int cell, int a1, int a2);

/// Same integral for an arbitrary polygon and scaling centre/length.
double integrate_scaled_monomial(std::span<const Vec2> polygon, const Vec2& center,
                                 double scale, int a1, int a2);

struct QuadraturePoint {
  Vec2 x;
  double w;
};

/// Positive-weight rule on the cell, exact for polynomials of degree <= order.
/// Built from a centroid fan; cells not star-shaped from the centroid are
/// ear-clipped instead.
std::vector<QuadraturePoint> quadrature_points(const Mesh& mesh, int cell, int order);
std::vector<QuadraturePoint> quadrature_points(std::span<const Vec2> polygon, int order);

struct CellQuality {
  double diameter = 0.0;
  double area = 0.0;
  Vec2 centroid = Vec2::Zero();
  /// Radius of the largest ball w.r.t. which the cell is star-shaped,
  /// divided by the diameter.
  double star_ratio = 0.0;
  /// Shortest edge divided by the diameter.
  double edge_ratio = 0.0;
};

struct MeshQuality {
  std::vector<CellQuality> cells;
  double h = 0.0;
  double min_star_ratio = 0.0;
  double min_edge_ratio = 0.0;
  /// min h_E / h.
  double min_size_ratio = 0.0;
  double rho0 = 0.0;
  double rho1 = 0.0;
  bool d1 = false;
  bool d2 = false;
  bool d3 = false;
  bool all() const { return d1 && d2 && d3; }
};

/// Radius of the largest ball contained in the kernel of the polygon.
double kernel_inradius(std::span<const Vec2> polygon);

MeshQuality check_assumptions(const Mesh& mesh, double rho0, double rho1);

/// Plain-text mesh format:
///   polymesh 1
///   V <count>
///   <x> <y>            (one line per vertex, 17 significant digits)
///   C <count>
///   <n> <i0> ... <in-1> (one line per cell, counter-clockwise)
void write_mesh(std::ostream& out, const Mesh& mesh);
Mesh read_mesh(std::istream& in);
void write_mesh_file(const std::string& path, const Mesh& mesh);
Mesh read_mesh_file(const std::string& path);

}  // namespace vemflow
