#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "stwind/geometry.hpp"

namespace stwind {

using Index = Eigen::Index;

/// Nonzero weight of a piecewise-linear basis function at a point.
struct BasisWeight {
  Index vertex;
  double weight;
};

/// Triangulated planar domain carrying piecewise-linear hat functions, one per
/// vertex. Triangles are stored counter-clockwise.
class Mesh {
 public:
  Mesh(std::vector<Point> vertices, std::vector<std::array<Index, 3>> triangles);

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<std::array<Index, 3>>& triangles() const { return triangles_; }
  Index n_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index n_triangles() const { return static_cast<Index>(triangles_.size()); }

  double triangle_area(Index t) const;
  double total_area() const;

  /// Unique undirected edges (i < j).
  std::vector<std::array<Index, 2>> edges() const;

  /// Barycentric weights of the triangle containing p (zero weights dropped),
  /// or nullopt when p lies outside the mesh.
  std::optional<std::vector<BasisWeight>> locate(Point p) const;

  friend bool operator==(const Mesh&, const Mesh&) = default;

 private:
  std::vector<Point> vertices_;
  std::vector<std::array<Index, 3>> triangles_;
};

struct MeshOptions {
  double max_edge_inner = 20.0;  // km, bound on edges inside the locations' hull
  double extension_factor = 0.3;  // outer buffer as a fraction of the hull diameter
  double outer_edge_factor = 2.0;  // outer spacing relative to max_edge_inner
};

/// Convex hull (counter-clockwise, no collinear points). Fewer than three
/// points are returned for degenerate input.
std::vector<Point> convex_hull(std::span<const Point> points);

/// Delaunay mesh covering the locations' convex hull plus an outer buffer.
/// Every input location becomes a vertex. Throws GeometryError when the
/// locations are collinear.
Mesh build_mesh(std::span<const Point> locations, const MeshOptions& options);

/// Structured triangulation of [x0, x1] x [y0, y1] with nx x ny vertices.
Mesh regular_grid_mesh(double x0, double x1, double y0, double y1, Index nx, Index ny);

/// Plain-text export: "stwind-mesh v1", vertex block, triangle block.
void write_mesh(const Mesh& mesh, std::ostream& out);
Mesh read_mesh(std::istream& in);
void write_mesh(const Mesh& mesh, const std::filesystem::path& path);
Mesh read_mesh(const std::filesystem::path& path);

}  // namespace stwind
