#include "obb/geometry.hpp"

#include <algorithm>
#include <limits>

#include "obb/errors.hpp"

namespace obb {
namespace {

using Vertices = Quad::Vertices;

double turn(Point a, Point b, Point c) { return cross(b - a, c - b); }

void check_finite(const Vertices& v) {
  for (const Point& p : v) {
    if (!is_finite(p)) throw InvalidQuad("quad has non-finite coordinates");
  }
}

// Returns a CCW copy; p0 is kept first when reversing.
Vertices orient_ccw(const Vertices& v) {
  const double sa = signed_area(v);
  if (!(std::abs(sa) > kGeomEps)) throw InvalidQuad("quad is degenerate (zero area)");
  if (sa > 0) return v;
  return {v[0], v[3], v[2], v[1]};
}

void check_convex(const Vertices& v) {
  for (int i = 0; i < 4; ++i) {
    if (!(turn(v[i], v[(i + 1) % 4], v[(i + 2) % 4]) > kGeomEps)) {
      throw InvalidQuad("quad is not strictly convex or is self-intersecting");
    }
  }
}

bool lower_yx(Point a, Point b) { return a.y < b.y || (a.y == b.y && a.x < b.x); }

Vertices rotate_to_start(const Vertices& v) {
  int start = 0;
  for (int i = 1; i < 4; ++i) {
    if (lower_yx(v[i], v[start])) start = i;
  }
  return {v[start], v[(start + 1) % 4], v[(start + 2) % 4], v[(start + 3) % 4]};
}

// Signed distance of q from the directed line a->b, positive on the left.
double side(Point a, Point b, Point q) { return cross(b - a, q - a) / norm(b - a); }

}  // namespace

Quad Quad::canonicalize(const Vertices& vertices) {
  check_finite(vertices);
  Vertices v = orient_ccw(vertices);
  check_convex(v);
  return Quad(rotate_to_start(v));
}

Quad Quad::from_ordered(const Vertices& vertices) {
  check_finite(vertices);
  Vertices v = orient_ccw(vertices);
  check_convex(v);
  return Quad(v);
}

Quad Quad::repair(const Vertices& vertices) {
  check_finite(vertices);
  // Andrew's monotone chain; collinear points are dropped.
  std::array<Point, 4> pts = vertices;
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  std::vector<Point> hull;
  hull.reserve(8);
  for (int pass = 0; pass < 2; ++pass) {
    const std::size_t base = hull.size();
    for (int k = 0; k < 4; ++k) {
      const Point p = pass == 0 ? pts[k] : pts[3 - k];
      while (hull.size() >= base + 2 && turn(hull[hull.size() - 2], hull.back(), p) <= kGeomEps) hull.pop_back();
      hull.push_back(p);
    }
    hull.pop_back();
  }
  if (hull.size() != 4) throw InvalidQuad("convex hull of the annotation does not have four vertices");
  return canonicalize({hull[0], hull[1], hull[2], hull[3]});
}

Quad Quad::axis_aligned(double x0, double y0, double x1, double y1) {
  return canonicalize({Point{x0, y0}, Point{x1, y0}, Point{x1, y1}, Point{x0, y1}});
}

Point Quad::centroid() const noexcept {
  return 0.25 * (v_[0] + v_[1] + v_[2] + v_[3]);
}

double perp_distance(Point p0, Point p1, Point q) {
  const Point e = p1 - p0;
  const double len = norm(e);
  if (!(len > kGeomEps)) throw DegenerateEdge("edge endpoints coincide");
  return std::abs(cross(e, p0 - q)) / len;
}

EdgeDistances edge_distances(const Quad& quad, Point q) {
  return {perp_distance(quad[0], quad[1], q), perp_distance(quad[1], quad[2], q),
          perp_distance(quad[2], quad[3], q), perp_distance(quad[3], quad[0], q)};
}

double oriented_centerness(const EdgeDistances& dist, double alpha) {
  if (!(alpha >= 1.0)) throw InvalidParams("center-ness alpha must be >= 1");
  const double ac = std::max(dist.a, dist.c);
  const double bd = std::max(dist.b, dist.d);
  if (!(ac > 0.0) || !(bd > 0.0)) throw DegenerateBox("opposite edge distances are both zero");
  const double r = (std::min(dist.a, dist.c) / ac) * (std::min(dist.b, dist.d) / bd);
  return alpha == 1.0 ? r : std::pow(r, 1.0 / alpha);
}

double oriented_centerness(const Quad& quad, Point q, double alpha) {
  if (!(alpha >= 1.0)) throw InvalidParams("center-ness alpha must be >= 1");
  if (!contains(quad, q)) throw OutsideBox("point lies outside the quad");
  return oriented_centerness(edge_distances(quad, q), alpha);
}

double aa_centerness(const Quad& quad, Point q) {
  const auto [x0, y0, x1, y1] = bounds(quad);
  if (q.x < x0 - kGeomEps || q.x > x1 + kGeomEps || q.y < y0 - kGeomEps || q.y > y1 + kGeomEps) {
    throw OutsideBox("point lies outside the axis-aligned hull");
  }
  const double l = std::max(0.0, q.x - x0);
  const double r = std::max(0.0, x1 - q.x);
  const double t = std::max(0.0, q.y - y0);
  const double b = std::max(0.0, y1 - q.y);
  return std::sqrt((std::min(l, r) / std::max(l, r)) * (std::min(t, b) / std::max(t, b)));
}

double signed_area(std::span<const Point> polygon) {
  const std::size_t n = polygon.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += cross(polygon[i], polygon[(i + 1) % n]);
  return 0.5 * s;
}

double area(const Quad& quad) { return signed_area(quad.vertices()); }

std::array<double, 4> bounds(const Quad& quad) {
  double x0 = quad[0].x, x1 = quad[0].x, y0 = quad[0].y, y1 = quad[0].y;
  for (int i = 1; i < 4; ++i) {
    x0 = std::min(x0, quad[i].x);
    x1 = std::max(x1, quad[i].x);
    y0 = std::min(y0, quad[i].y);
    y1 = std::max(y1, quad[i].y);
  }
  return {x0, y0, x1, y1};
}

Quad axis_aligned_hull(const Quad& quad) {
  const auto [x0, y0, x1, y1] = bounds(quad);
  return Quad::axis_aligned(x0, y0, x1, y1);
}

bool contains(const Quad& quad, Point q) {
  for (int i = 0; i < 4; ++i) {
    if (side(quad[i], quad[(i + 1) % 4], q) < -kGeomEps) return false;
  }
  return true;
}

bool strictly_contains(const Quad& quad, Point q) {
  for (int i = 0; i < 4; ++i) {
    if (!(side(quad[i], quad[(i + 1) % 4], q) > kGeomEps)) return false;
  }
  return true;
}

std::vector<Point> clip_polygon(std::span<const Point> subject, const Quad& clip) {
  std::vector<Point> poly(subject.begin(), subject.end());
  std::vector<Point> next;
  next.reserve(poly.size() + 4);
  for (int e = 0; e < 4 && !poly.empty(); ++e) {
    const Point a = clip[e];
    const Point b = clip[(e + 1) % 4];
    next.clear();
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point cur = poly[i];
      const Point nxt = poly[(i + 1) % n];
      const double dc = cross(b - a, cur - a);
      const double dn = cross(b - a, nxt - a);
      if (dc >= 0) next.push_back(cur);
      if ((dc >= 0) != (dn >= 0)) {
        const double t = dc / (dc - dn);
        next.push_back(cur + t * (nxt - cur));
      }
    }
    poly.swap(next);
  }
  return poly;
}

double intersection_area(const Quad& a, const Quad& b) {
  const auto ba = bounds(a);
  const auto bb = bounds(b);
  if (ba[2] <= bb[0] || bb[2] <= ba[0] || ba[3] <= bb[1] || bb[3] <= ba[1]) return 0.0;
  const std::vector<Point> poly = clip_polygon(a.vertices(), b);
  if (poly.size() < 3) return 0.0;
  return std::abs(signed_area(poly));
}

double iou(const Quad& a, const Quad& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = area(a) + area(b) - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double min_cross_width(const Quad& quad, int edge) {
  const int e = edge % 2;
  const Point a0 = quad[e], a1 = quad[e + 1];
  const Point c0 = quad[e + 2], c1 = quad[(e + 3) % 4];
  return std::min({perp_distance(c0, c1, a0), perp_distance(c0, c1, a1), perp_distance(a0, a1, c0),
                   perp_distance(a0, a1, c1)});
}

}  // namespace obb
