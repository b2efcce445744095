#include "stwind/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <string>

#include <boost/polygon/voronoi.hpp>

#include "stwind/error.hpp"

namespace stwind {

Mesh::Mesh(std::vector<Point> vertices, std::vector<std::array<Index, 3>> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  if (vertices_.size() < 3) throw GeometryError("mesh needs at least 3 vertices");
  if (triangles_.empty()) throw GeometryError("mesh has no triangles");
  for (auto& tri : triangles_) {
    for (Index v : tri)
      if (v < 0 || v >= n_vertices()) throw GeometryError("triangle references a missing vertex");
    const double a = orient2d(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
    if (a == 0.0 || !std::isfinite(a)) throw GeometryError("degenerate triangle in mesh");
    if (a < 0.0) std::swap(tri[1], tri[2]);
  }
}

double Mesh::triangle_area(Index t) const {
  const auto& tri = triangles_[static_cast<std::size_t>(t)];
  return 0.5 * orient2d(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
}

double Mesh::total_area() const {
  double a = 0.0;
  for (Index t = 0; t < n_triangles(); ++t) a += triangle_area(t);
  return a;
}

std::vector<std::array<Index, 2>> Mesh::edges() const {
  std::set<std::array<Index, 2>> set;
  for (const auto& tri : triangles_)
    for (int k = 0; k < 3; ++k) {
      Index a = tri[k], b = tri[(k + 1) % 3];
      set.insert({std::min(a, b), std::max(a, b)});
    }
  return {set.begin(), set.end()};
}

std::optional<std::vector<BasisWeight>> Mesh::locate(Point p) const {
  for (Index v = 0; v < n_vertices(); ++v) {
    const Point q = vertices_[static_cast<std::size_t>(v)];
    if (distance(p, q) <= 1e-12 * (1.0 + std::abs(q.x) + std::abs(q.y)))
      return std::vector<BasisWeight>{{v, 1.0}};
  }
  for (const auto& tri : triangles_) {
    const Point a = vertices_[tri[0]], b = vertices_[tri[1]], c = vertices_[tri[2]];
    const double area = orient2d(a, b, c);
    std::array<double, 3> w = {orient2d(p, b, c) / area, orient2d(a, p, c) / area, orient2d(a, b, p) / area};
    if (std::min({w[0], w[1], w[2]}) < -1e-10) continue;
    double sum = 0.0;
    for (auto& x : w) {
      if (x < 1e-14) x = 0.0;
      sum += x;
    }
    std::vector<BasisWeight> out;
    for (int k = 0; k < 3; ++k)
      if (w[k] > 0.0) out.push_back({tri[k], w[k] / sum});
    return out;
  }
  return std::nullopt;
}

std::vector<Point> convex_hull(std::span<const Point> points) {
  std::vector<Point> p(points.begin(), points.end());
  std::sort(p.begin(), p.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3) return p;
  std::vector<Point> hull(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && orient2d(hull[k - 2], hull[k - 1], p[i]) <= 0.0) --k;
    hull[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && orient2d(hull[k - 2], hull[k - 1], p[i - 1]) <= 0.0) --k;
    hull[k++] = p[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

namespace {

double segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a, ap = p - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  const double t = len2 > 0.0 ? std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0) : 0.0;
  return distance(p, a + t * ab);
}

struct ConvexPolygon {
  std::vector<Point> v;  // counter-clockwise

  bool contains(Point p, double tol) const {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Point a = v[i], b = v[(i + 1) % v.size()];
      if (orient2d(a, b, p) < -tol * distance(a, b)) return false;
    }
    return true;
  }

  double boundary_distance(Point p) const {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) d = std::min(d, segment_distance(p, v[i], v[(i + 1) % v.size()]));
    return d;
  }

  double diameter() const {
    double d = 0.0;
    for (auto a : v)
      for (auto b : v) d = std::max(d, distance(a, b));
    return d;
  }
};

// Integer snapping used to feed the exact-predicate Voronoi builder.
class Quantizer {
 public:
  explicit Quantizer(std::span<const Point> pts) {
    double xmin = pts[0].x, xmax = xmin, ymin = pts[0].y, ymax = ymin;
    for (auto p : pts) {
      xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    }
    center_ = {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)};
    const double half = std::max({0.5 * (xmax - xmin), 0.5 * (ymax - ymin), 1e-12});
    scale_ = static_cast<double>(1 << 28) / half;
  }
  std::array<int, 2> to_int(Point p) const {
    return {static_cast<int>(std::lround((p.x - center_.x) * scale_)),
            static_cast<int>(std::lround((p.y - center_.y) * scale_))};
  }
  Point to_point(std::array<int, 2> q) const { return {center_.x + q[0] / scale_, center_.y + q[1] / scale_}; }

 private:
  Point center_;
  double scale_ = 1.0;
};

std::vector<std::array<Index, 3>> delaunay(const std::vector<Point>& pts, const Quantizer& quant) {
  using boost::polygon::point_data;
  std::vector<point_data<int>> ipts;
  ipts.reserve(pts.size());
  for (auto p : pts) {
    const auto q = quant.to_int(p);
    ipts.emplace_back(q[0], q[1]);
  }
  boost::polygon::voronoi_diagram<double> vd;
  boost::polygon::construct_voronoi(ipts.begin(), ipts.end(), &vd);
  std::vector<std::array<Index, 3>> tris;
  for (const auto& vertex : vd.vertices()) {
    std::vector<Index> ring;
    const auto* edge = vertex.incident_edge();
    do {
      ring.push_back(static_cast<Index>(edge->cell()->source_index()));
      edge = edge->rot_next();
    } while (edge != vertex.incident_edge());
    // Cocircular sites give a convex polygon; fan it.
    for (std::size_t k = 1; k + 1 < ring.size(); ++k) {
      std::array<Index, 3> t = {ring[0], ring[k], ring[k + 1]};
      if (orient2d(pts[t[0]], pts[t[1]], pts[t[2]]) < 0.0) std::swap(t[1], t[2]);
      tris.push_back(t);
    }
  }
  return tris;
}

// 1 for an equilateral triangle, 0 for a degenerate one.
double triangle_quality(Point a, Point b, Point c) {
  const double e2 = std::pow(distance(a, b), 2) + std::pow(distance(b, c), 2) + std::pow(distance(c, a), 2);
  return e2 > 0.0 ? 2.0 * std::sqrt(3.0) * std::abs(orient2d(a, b, c)) / e2 : 0.0;
}

// Collinear points on the outer hull pick up tiny bulges from snapping, and the
// Delaunay triangulation then closes them with flat triangles. Peel those off.
void strip_boundary_slivers(const std::vector<Point>& pts, std::vector<std::array<Index, 3>>& tris) {
  constexpr double kMinQuality = 1e-3;
  for (bool changed = true; changed;) {
    changed = false;
    std::map<std::array<Index, 2>, int> uses;
    for (const auto& t : tris)
      for (int k = 0; k < 3; ++k) ++uses[{std::min(t[k], t[(k + 1) % 3]), std::max(t[k], t[(k + 1) % 3])}];
    std::vector<std::array<Index, 3>> kept;
    for (const auto& t : tris) {
      bool boundary = false;
      for (int k = 0; k < 3; ++k) boundary |= uses[{std::min(t[k], t[(k + 1) % 3]), std::max(t[k], t[(k + 1) % 3])}] == 1;
      if (boundary && triangle_quality(pts[t[0]], pts[t[1]], pts[t[2]]) < kMinQuality) {
        changed = true;
        continue;
      }
      kept.push_back(t);
    }
    tris = std::move(kept);
  }
}

void add_boundary_points(const ConvexPolygon& poly, double spacing, std::vector<Point>& out) {
  for (std::size_t i = 0; i < poly.v.size(); ++i) {
    const Point a = poly.v[i], b = poly.v[(i + 1) % poly.v.size()];
    const auto n = static_cast<int>(std::ceil(distance(a, b) / spacing));
    for (int k = 1; k < n; ++k) out.push_back(a + (static_cast<double>(k) / n) * (b - a));
  }
}

std::vector<Point> triangular_lattice(const ConvexPolygon& poly, double spacing) {
  double xmin = poly.v[0].x, xmax = xmin, ymin = poly.v[0].y, ymax = ymin;
  for (auto p : poly.v) {
    xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
  }
  const double dy = spacing * std::sqrt(3.0) / 2.0;
  std::vector<Point> out;
  int row = 0;
  for (double y = ymin; y <= ymax; y += dy, ++row) {
    for (double x = xmin + (row % 2 ? 0.5 * spacing : 0.0); x <= xmax; x += spacing) {
      if (poly.contains({x, y}, 0.0)) out.push_back({x, y});
    }
  }
  return out;
}

double nearest_distance(Point p, const std::vector<Point>& set) {
  double d = std::numeric_limits<double>::infinity();
  for (auto q : set) d = std::min(d, distance(p, q));
  return d;
}

}  // namespace

Mesh build_mesh(std::span<const Point> locations, const MeshOptions& options) {
  if (!(options.max_edge_inner > 0.0) || options.extension_factor < 0.0 || !(options.outer_edge_factor >= 1.0))
    throw ArgumentError("invalid mesh options");
  for (auto p : locations)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("non-finite location");
  const ConvexPolygon inner{convex_hull(locations)};
  if (inner.v.size() < 3) throw GeometryError("locations are collinear or fewer than 3 distinct points");

  const double diam = inner.diameter();
  const double spacing = 0.9 * options.max_edge_inner;
  const double outer_spacing = options.outer_edge_factor * options.max_edge_inner;

  // Inputs first (deduplicated), so farm locations are exact vertices.
  std::vector<Point> pts;
  for (auto p : locations)
    if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(p);
  const std::vector<Point> inputs = pts;

  std::vector<Point> candidates;
  add_boundary_points(inner, spacing, candidates);
  for (auto p : triangular_lattice(inner, spacing))
    if (inner.boundary_distance(p) >= 0.5 * spacing) candidates.push_back(p);

  if (options.extension_factor > 0.0) {
    const double ext = options.extension_factor * diam;
    std::vector<Point> ring;
    for (auto h : inner.v)
      for (int k = 0; k < 32; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 32.0;
        ring.push_back({h.x + ext * std::cos(a), h.y + ext * std::sin(a)});
      }
    const ConvexPolygon outer{convex_hull(ring)};
    for (auto p : outer.v) candidates.push_back(p);
    add_boundary_points(outer, outer_spacing, candidates);
    for (auto p : triangular_lattice(outer, outer_spacing)) {
      if (inner.contains(p, 0.0) || inner.boundary_distance(p) < 0.5 * outer_spacing ||
          outer.boundary_distance(p) < 0.5 * outer_spacing)
        continue;
      candidates.push_back(p);
    }
  }
  for (auto p : candidates)
    if (nearest_distance(p, inputs) >= 0.5 * spacing && nearest_distance(p, pts) >= 0.25 * spacing)
      pts.push_back(p);

  std::vector<Point> all = pts;
  const Quantizer quant(all);
  // Snap generated points so the Voronoi input and the vertex coordinates agree.
  for (std::size_t i = inputs.size(); i < pts.size(); ++i) pts[i] = quant.to_point(quant.to_int(pts[i]));

  const double tol = 1e-9 * (1.0 + diam);
  std::vector<std::array<Index, 3>> tris;
  for (int round = 0; round < 64; ++round) {
    tris = delaunay(pts, quant);
    std::set<std::array<Index, 2>> long_edges;
    for (const auto& t : tris)
      for (int k = 0; k < 3; ++k) {
        const Index a = t[k], b = t[(k + 1) % 3];
        if (distance(pts[a], pts[b]) > options.max_edge_inner && inner.contains(pts[a], tol) &&
            inner.contains(pts[b], tol))
          long_edges.insert({std::min(a, b), std::max(a, b)});
      }
    if (long_edges.empty()) break;
    for (const auto& e : long_edges) pts.push_back(quant.to_point(quant.to_int(0.5 * (pts[e[0]] + pts[e[1]]))));
  }
  strip_boundary_slivers(pts, tris);

  std::vector<char> used(pts.size(), 0);
  for (const auto& t : tris)
    for (Index v : t) used[static_cast<std::size_t>(v)] = 1;
  if (std::count(used.begin(), used.begin() + static_cast<std::ptrdiff_t>(inputs.size()), 0) > 0)
    throw GeometryError("locations too close to be resolved as distinct mesh vertices");
  // Drop generated points that no triangle references.
  std::vector<Index> remap(pts.size(), -1);
  std::vector<Point> kept;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (used[i]) {
      remap[i] = static_cast<Index>(kept.size());
      kept.push_back(pts[i]);
    }
  for (auto& t : tris)
    for (auto& v : t) v = remap[static_cast<std::size_t>(v)];
  return Mesh(std::move(kept), std::move(tris));
}

Mesh regular_grid_mesh(double x0, double x1, double y0, double y1, Index nx, Index ny) {
  if (nx < 2 || ny < 2 || !(x1 > x0) || !(y1 > y0)) throw ArgumentError("invalid grid mesh dimensions");
  std::vector<Point> v;
  v.reserve(static_cast<std::size_t>(nx * ny));
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i < nx; ++i)
      v.push_back({x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(nx - 1),
                   y0 + (y1 - y0) * static_cast<double>(j) / static_cast<double>(ny - 1)});
  std::vector<std::array<Index, 3>> t;
  for (Index j = 0; j + 1 < ny; ++j)
    for (Index i = 0; i + 1 < nx; ++i) {
      const Index a = j * nx + i, b = a + 1, c = a + nx, d = c + 1;
      // alternate the diagonal to avoid a directional bias
      if ((i + j) % 2 == 0) {
        t.push_back({a, b, d});
        t.push_back({a, d, c});
      } else {
        t.push_back({a, b, c});
        t.push_back({b, d, c});
      }
    }
  return Mesh(std::move(v), std::move(t));
}

void write_mesh(const Mesh& mesh, std::ostream& out) {
  out << "stwind-mesh v1\n" << std::setprecision(17);
  out << "vertices " << mesh.n_vertices() << '\n';
  for (auto p : mesh.vertices()) out << p.x << ' ' << p.y << '\n';
  out << "triangles " << mesh.n_triangles() << '\n';
  for (const auto& t : mesh.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

Mesh read_mesh(std::istream& in) {
  std::string magic, version, key;
  if (!(in >> magic >> version) || magic != "stwind-mesh") throw ParseError("not a mesh file");
  if (version != "v1") throw ParseError("unsupported mesh version '" + version + "'");
  Index nv = 0, nt = 0;
  if (!(in >> key >> nv) || key != "vertices" || nv < 0) throw ParseError("mesh: bad vertex header");
  std::vector<Point> v(static_cast<std::size_t>(nv));
  for (auto& p : v)
    if (!(in >> p.x >> p.y)) throw ParseError("mesh: truncated vertex block");
  if (!(in >> key >> nt) || key != "triangles" || nt < 0) throw ParseError("mesh: bad triangle header");
  std::vector<std::array<Index, 3>> t(static_cast<std::size_t>(nt));
  for (auto& tri : t)
    if (!(in >> tri[0] >> tri[1] >> tri[2])) throw ParseError("mesh: truncated triangle block");
  return Mesh(std::move(v), std::move(t));
}

void write_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  write_mesh(mesh, out);
}

Mesh read_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return read_mesh(in);
}

}  // namespace stwind
