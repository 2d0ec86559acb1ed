#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace obb {

/// Absolute tolerance used for geometric equality and degeneracy checks.
inline constexpr double kGeomEps = 1e-12;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point operator*(double k, Point a) { return {k * a.x, k * a.y}; }
  friend constexpr Point operator*(Point a, double k) { return {k * a.x, k * a.y}; }
  friend constexpr bool operator==(Point a, Point b) = default;
};

constexpr double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
constexpr double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline bool is_finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Convex, counter-clockwise (positive shoelace area) quadrilateral.
///
/// A Quad can only be obtained through `canonicalize`, `from_ordered` or
/// `repair`, so every instance satisfies the invariants: finite coordinates,
/// strictly convex, positive area.
class Quad {
 public:
  using Vertices = std::array<Point, 4>;

  /// Reorders to CCW starting at the vertex with minimal (y, x).
  /// Throws InvalidQuad for non-finite, degenerate, non-convex or self-intersecting input.
  static Quad canonicalize(const Vertices& vertices);

  /// Keeps the given vertex order (p0 stays first). A clockwise input is
  /// reversed to (p0, p3, p2, p1). Throws InvalidQuad like `canonicalize`.
  static Quad from_ordered(const Vertices& vertices);

  /// Canonical quad from the convex hull of four points. Accepts orderings
  /// that self-intersect as long as the hull has four vertices.
  static Quad repair(const Vertices& vertices);

  /// Axis-aligned rectangle [x0, x1] x [y0, y1] in canonical order.
  static Quad axis_aligned(double x0, double y0, double x1, double y1);

  const Vertices& vertices() const noexcept { return v_; }
  const Point& operator[](std::size_t i) const noexcept { return v_[i]; }

  /// Mean of the four vertices.
  Point centroid() const noexcept;

  friend bool operator==(const Quad&, const Quad&) = default;

 private:
  explicit Quad(const Vertices& v) : v_(v) {}
  Vertices v_;
};

struct EdgeDistances {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
};

/// Perpendicular distance from q to the line through p0 and p1.
/// Throws DegenerateEdge when p0 and p1 coincide.
double perp_distance(Point p0, Point p1, Point q);

/// Distances from q to the lines of edges (p0,p1), (p1,p2), (p2,p3), (p3,p0).
EdgeDistances edge_distances(const Quad& quad, Point q);

/// Oriented center-ness of an interior point: the product of the two
/// opposite-edge distance ratios, raised to 1/alpha.
/// Throws OutsideBox if q is not contained, InvalidParams if alpha < 1.
double oriented_centerness(const Quad& quad, Point q, double alpha);

/// Same as oriented_centerness but from precomputed distances.
double oriented_centerness(const EdgeDistances& dist, double alpha);

/// FCOS-style center-ness evaluated on the axis-aligned hull of the quad.
double aa_centerness(const Quad& quad, Point q);

double signed_area(std::span<const Point> polygon);
double area(const Quad& quad);

/// Area of the intersection of two convex quads (half-plane clipping).
double intersection_area(const Quad& a, const Quad& b);

double iou(const Quad& a, const Quad& b);

/// Boundary points count as inside.
bool contains(const Quad& quad, Point q);

/// Points closer than kGeomEps to an edge are rejected.
bool strictly_contains(const Quad& quad, Point q);

Quad axis_aligned_hull(const Quad& quad);

/// Bounds as {xmin, ymin, xmax, ymax}.
std::array<double, 4> bounds(const Quad& quad);

/// Convex polygon clipped against the CCW convex quad `clip`.
std::vector<Point> clip_polygon(std::span<const Point> subject, const Quad& clip);

/// For the edge pair (edge, edge+2), the smallest distance from a vertex to the
/// opposite edge line. Lower-bounds a + c (or b + d) anywhere inside the quad.
double min_cross_width(const Quad& quad, int edge);

}  // namespace obb
