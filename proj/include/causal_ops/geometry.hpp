#pragma once

// Exact causal structure of 1+1 Minkowski spacetime. Coordinates are (t, x)
// with signature (-,+) and c = 1. Nothing in this header rounds.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "causal_ops/error.hpp"

namespace causal_ops {

using Rational = boost::multiprecision::cpp_rational;

inline Rational rabs(const Rational& r) { return r < 0 ? Rational(-r) : r; }
inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline std::string to_string(const Rational& r) { return r.str(); }

inline Rational parse_rational(const std::string& s) {
  auto bad = [&] { return Error(ErrorKind::Parse, "not a rational: '" + s + "'"); };
  if (s.empty()) throw bad();
  auto slash = s.find('/');
  auto digits = [](const std::string& p, bool sign_ok) {
    std::size_t i = (sign_ok && !p.empty() && p[0] == '-') ? 1 : 0;
    if (i >= p.size()) return false;
    for (; i < p.size(); ++i)
      if (p[i] < '0' || p[i] > '9') return false;
    return true;
  };
  if (slash == std::string::npos) {
    if (!digits(s, true)) throw bad();
    return Rational(s);
  }
  std::string num = s.substr(0, slash), den = s.substr(slash + 1);
  if (!digits(num, true) || !digits(den, false)) throw bad();
  if (den.find_first_not_of('0') == std::string::npos) throw bad();
  return Rational(s);
}

struct Point {
  Rational t;
  Rational x;
};

inline bool operator==(const Point& a, const Point& b) { return a.t == b.t && a.x == b.x; }
inline bool operator!=(const Point& a, const Point& b) { return !(a == b); }

enum class CausalRelation { timelike_future, lightlike_future, spacelike, lightlike_past, timelike_past, equal };

inline const char* to_string(CausalRelation r) {
  switch (r) {
    case CausalRelation::timelike_future: return "timelike_future";
    case CausalRelation::lightlike_future: return "lightlike_future";
    case CausalRelation::spacelike: return "spacelike";
    case CausalRelation::lightlike_past: return "lightlike_past";
    case CausalRelation::timelike_past: return "timelike_past";
    case CausalRelation::equal: return "equal";
  }
  return "?";
}

/// Relation of q as seen from p.
inline CausalRelation causal_relation(const Point& p, const Point& q) {
  Rational dt = q.t - p.t;
  Rational dx = rabs(q.x - p.x);
  if (dt == 0 && dx == 0) return CausalRelation::equal;
  if (dt > dx) return CausalRelation::timelike_future;
  if (dt == dx) return CausalRelation::lightlike_future;
  if (-dt > dx) return CausalRelation::timelike_past;
  if (-dt == dx) return CausalRelation::lightlike_past;
  return CausalRelation::spacelike;
}

/// q in J+(p).
inline bool causally_precedes(const Point& p, const Point& q) { return q.t - p.t >= rabs(q.x - p.x); }
/// q in I+(p).
inline bool chronologically_precedes(const Point& p, const Point& q) { return q.t - p.t > rabs(q.x - p.x); }

struct Diamond {
  Point bottom;
  Point top;
  bool closed = false;
};

inline bool operator==(const Diamond& a, const Diamond& b) {
  return a.bottom == b.bottom && a.top == b.top && a.closed == b.closed;
}

inline Diamond make_diamond(Point bottom, Point top, bool closed = false) {
  if (!chronologically_precedes(bottom, top))
    throw Error(ErrorKind::InvalidValue, "diamond top must lie in the chronological future of its bottom");
  return Diamond{std::move(bottom), std::move(top), closed};
}

inline Diamond closure(const Diamond& d) { return Diamond{d.bottom, d.top, true}; }
inline Diamond interior(const Diamond& d) { return Diamond{d.bottom, d.top, false}; }

struct SpacelikeInterval {
  Rational t;
  Rational x_lo;
  Rational x_hi;
};

inline bool operator==(const SpacelikeInterval& a, const SpacelikeInterval& b) {
  return a.t == b.t && a.x_lo == b.x_lo && a.x_hi == b.x_hi;
}

inline SpacelikeInterval make_interval(Rational t, Rational lo, Rational hi) {
  if (!(lo < hi)) throw Error(ErrorKind::InvalidValue, "interval requires x_lo < x_hi");
  return SpacelikeInterval{std::move(t), std::move(lo), std::move(hi)};
}

// ---------------------------------------------------------------------------
// Subsets of the real line with exact open/closed endpoints.

struct Interval {
  std::optional<Rational> lo;  // nullopt: -infinity
  bool lo_closed = false;
  std::optional<Rational> hi;  // nullopt: +infinity
  bool hi_closed = false;

  static Interval all() { return {}; }
  static Interval closed(Rational a, Rational b) { return {std::move(a), true, std::move(b), true}; }

  bool empty() const {
    if (!lo || !hi) return false;
    if (*lo > *hi) return true;
    if (*lo == *hi) return !(lo_closed && hi_closed);
    return false;
  }
  bool contains(const Rational& t) const {
    if (lo && (t < *lo || (t == *lo && !lo_closed))) return false;
    if (hi && (t > *hi || (t == *hi && !hi_closed))) return false;
    return true;
  }
};

inline Interval intersect(const Interval& a, const Interval& b) {
  Interval r;
  if (!a.lo) { r.lo = b.lo; r.lo_closed = b.lo_closed; }
  else if (!b.lo) { r.lo = a.lo; r.lo_closed = a.lo_closed; }
  else if (*a.lo > *b.lo) { r.lo = a.lo; r.lo_closed = a.lo_closed; }
  else if (*b.lo > *a.lo) { r.lo = b.lo; r.lo_closed = b.lo_closed; }
  else { r.lo = a.lo; r.lo_closed = a.lo_closed && b.lo_closed; }
  if (!a.hi) { r.hi = b.hi; r.hi_closed = b.hi_closed; }
  else if (!b.hi) { r.hi = a.hi; r.hi_closed = a.hi_closed; }
  else if (*a.hi < *b.hi) { r.hi = a.hi; r.hi_closed = a.hi_closed; }
  else if (*b.hi < *a.hi) { r.hi = b.hi; r.hi_closed = b.hi_closed; }
  else { r.hi = a.hi; r.hi_closed = a.hi_closed && b.hi_closed; }
  return r;
}

/// Finite union of disjoint intervals, kept sorted and merged.
class TimeSet {
 public:
  TimeSet() = default;
  explicit TimeSet(Interval i) { add(std::move(i)); normalize(); }

  static TimeSet all() { return TimeSet(Interval::all()); }

  const std::vector<Interval>& parts() const { return parts_; }
  bool empty() const { return parts_.empty(); }
  bool is_all() const { return parts_.size() == 1 && !parts_[0].lo && !parts_[0].hi; }

  bool contains(const Rational& t) const {
    for (const auto& p : parts_)
      if (p.contains(t)) return true;
    return false;
  }

  /// True iff `i` is a subset of this set.
  bool covers(const Interval& i) const {
    if (i.empty()) return true;
    return TimeSet(i).minus(*this).empty();
  }

  TimeSet united(const TimeSet& o) const {
    TimeSet r;
    r.parts_ = parts_;
    r.parts_.insert(r.parts_.end(), o.parts_.begin(), o.parts_.end());
    r.normalize();
    return r;
  }

  TimeSet intersected(const TimeSet& o) const {
    TimeSet r;
    for (const auto& a : parts_)
      for (const auto& b : o.parts_) r.add(intersect(a, b));
    r.normalize();
    return r;
  }

  TimeSet complement() const {
    TimeSet r;
    Interval gap;  // starts at -infinity
    for (const auto& p : parts_) {
      gap.hi = p.lo;
      gap.hi_closed = p.lo ? !p.lo_closed : false;
      if (p.lo) r.add(gap);
      if (!p.hi) { r.normalize(); return r; }
      gap = Interval{p.hi, !p.hi_closed, std::nullopt, false};
    }
    r.add(gap);
    r.normalize();
    return r;
  }

  TimeSet minus(const TimeSet& o) const { return intersected(o.complement()); }

  std::optional<Rational> inf() const {
    if (parts_.empty()) return std::nullopt;
    return parts_.front().lo;
  }
  std::optional<Rational> sup() const {
    if (parts_.empty()) return std::nullopt;
    return parts_.back().hi;
  }

 private:
  void add(Interval i) {
    if (!i.empty()) parts_.push_back(std::move(i));
  }

  static bool lo_less(const Interval& a, const Interval& b) {
    if (!a.lo) return b.lo.has_value();
    if (!b.lo) return false;
    if (*a.lo != *b.lo) return *a.lo < *b.lo;
    return a.lo_closed && !b.lo_closed;
  }

  void normalize() {
    std::sort(parts_.begin(), parts_.end(), lo_less);
    std::vector<Interval> out;
    for (auto& p : parts_) {
      if (!out.empty()) {
        Interval& last = out.back();
        bool joins = !last.hi || !p.lo || *p.lo < *last.hi ||
                     (*p.lo == *last.hi && (last.hi_closed || p.lo_closed));
        if (joins) {
          if (!last.hi) continue;
          if (!p.hi) { last.hi.reset(); last.hi_closed = false; }
          else if (*p.hi > *last.hi) { last.hi = p.hi; last.hi_closed = p.hi_closed; }
          else if (*p.hi == *last.hi) { last.hi_closed = last.hi_closed || p.hi_closed; }
          continue;
        }
      }
      out.push_back(std::move(p));
    }
    parts_ = std::move(out);
  }

  std::vector<Interval> parts_;
};

// ---------------------------------------------------------------------------
// Convex regions as intersections of half-planes a*t + b*x + c (> or >=) 0.

struct HalfPlane {
  Rational a, b, c;
  bool strict;
};

using Polygon = std::vector<HalfPlane>;

inline bool contains(const Polygon& poly, const Point& p) {
  for (const auto& h : poly) {
    Rational v = h.a * p.t + h.b * p.x + h.c;
    if (h.strict ? !(v > 0) : !(v >= 0)) return false;
  }
  return true;
}

inline Polygon future_cone(const Point& p, bool strict) {
  return {{1, -1, p.x - p.t, strict}, {1, 1, -p.t - p.x, strict}};
}

inline Polygon past_cone(const Point& q, bool strict) {
  return {{-1, -1, q.t + q.x, strict}, {-1, 1, q.t - q.x, strict}};
}

inline Polygon diamond_polygon(const Diamond& d) {
  Polygon poly = future_cone(d.bottom, !d.closed);
  for (auto& h : past_cone(d.top, !d.closed)) poly.push_back(h);
  return poly;
}

/// D+ of an open spacelike interval: t >= iv.t and |x - c| < r - (t - iv.t).
inline Polygon future_development(const SpacelikeInterval& iv) {
  Rational c = (iv.x_lo + iv.x_hi) / 2;
  Rational r = (iv.x_hi - iv.x_lo) / 2;
  return {{1, 0, -iv.t, false}, {-1, -1, r + iv.t + c, true}, {-1, 1, r + iv.t - c, true}};
}

// ---------------------------------------------------------------------------
// Worldlines: future-directed piecewise-linear inextendible causal curves,
// given as a graph x(t) over all of R.

struct Worldline {
  std::vector<Point> vertices;
  Rational initial_velocity;
  Rational final_velocity;
};

inline bool operator==(const Worldline& a, const Worldline& b) {
  return a.vertices == b.vertices && a.initial_velocity == b.initial_velocity &&
         a.final_velocity == b.final_velocity;
}

/// Throws InvalidValue naming the first offending vertex pair.
inline void validate_worldline(const Worldline& w) {
  if (w.vertices.empty()) throw Error(ErrorKind::InvalidValue, "worldline needs at least one vertex");
  if (rabs(w.initial_velocity) > 1) throw Error(ErrorKind::InvalidValue, "initial_velocity exceeds 1");
  if (rabs(w.final_velocity) > 1) throw Error(ErrorKind::InvalidValue, "final_velocity exceeds 1");
  for (std::size_t i = 0; i + 1 < w.vertices.size(); ++i) {
    const Point& p = w.vertices[i];
    const Point& q = w.vertices[i + 1];
    if (!(q.t > p.t) || !causally_precedes(p, q))
      throw Error(ErrorKind::InvalidValue, "vertices[" + std::to_string(i) + "] -> vertices[" +
                                               std::to_string(i + 1) + "] is not a future-directed causal segment");
  }
}

inline Worldline vertical_worldline(Rational x) { return Worldline{{Point{0, std::move(x)}}, 0, 0}; }

inline Worldline straight_worldline(Point through, Rational velocity) {
  return Worldline{{std::move(through)}, velocity, velocity};
}

/// One linear piece x = anchor.x + velocity * (t - anchor.t) on a time domain.
struct WorldlinePiece {
  Interval domain;
  Point anchor;
  Rational velocity;
};

inline std::vector<WorldlinePiece> pieces(const Worldline& w) {
  std::vector<WorldlinePiece> out;
  const auto& v = w.vertices;
  out.push_back({Interval{std::nullopt, false, v.front().t, true}, v.front(), w.initial_velocity});
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    out.push_back({Interval::closed(v[i].t, v[i + 1].t), v[i], (v[i + 1].x - v[i].x) / (v[i + 1].t - v[i].t)});
  out.push_back({Interval{v.back().t, true, std::nullopt, false}, v.back(), w.final_velocity});
  return out;
}

inline Rational x_at(const Worldline& w, const Rational& t) {
  const auto& v = w.vertices;
  if (t <= v.front().t) return v.front().x + w.initial_velocity * (t - v.front().t);
  if (t >= v.back().t) return v.back().x + w.final_velocity * (t - v.back().t);
  auto it = std::upper_bound(v.begin(), v.end(), t, [](const Rational& s, const Point& p) { return s < p.t; });
  const Point& b = *it;
  const Point& a = *(it - 1);
  return a.x + (b.x - a.x) * (t - a.t) / (b.t - a.t);
}

inline Point point_at(const Worldline& w, const Rational& t) { return Point{t, x_at(w, t)}; }

/// Times at which the worldline lies in a convex polygon.
inline TimeSet time_set(const Worldline& w, const Polygon& poly) {
  TimeSet acc;
  for (const auto& piece : pieces(w)) {
    Interval dom = piece.domain;
    bool dead = false;
    for (const auto& h : poly) {
      // a t + b (x0 + v (t - t0)) + c
      Rational alpha = h.a + h.b * piece.velocity;
      Rational beta = h.b * (piece.anchor.x - piece.velocity * piece.anchor.t) + h.c;
      if (alpha == 0) {
        if (h.strict ? !(beta > 0) : !(beta >= 0)) { dead = true; break; }
        continue;
      }
      Rational root = -beta / alpha;
      Interval half = alpha > 0 ? Interval{root, !h.strict, std::nullopt, false}
                                : Interval{std::nullopt, false, root, !h.strict};
      dom = intersect(dom, half);
      if (dom.empty()) { dead = true; break; }
    }
    if (!dead) acc = acc.united(TimeSet(dom));
  }
  return acc;
}

/// All exact intersection points of two worldlines, sorted by t.
inline std::vector<Point> worldline_intersections(const Worldline& a, const Worldline& b) {
  std::vector<Rational> ts;
  for (const auto& p : a.vertices) ts.push_back(p.t);
  for (const auto& p : b.vertices) ts.push_back(p.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  std::vector<Rational> roots;
  auto d = [&](const Rational& t) { return x_at(a, t) - x_at(b, t); };
  auto overlap = [] { return Error(ErrorKind::DegenerateOverlap, "worldlines share a segment"); };

  // Left ray.
  {
    Rational t0 = ts.front();
    Rational slope = a.initial_velocity - b.initial_velocity;
    Rational d0 = d(t0);
    if (slope == 0) {
      if (d0 == 0) throw overlap();
    } else {
      Rational r = t0 - d0 / slope;
      if (r <= t0) roots.push_back(r);
    }
  }
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    Rational d0 = d(ts[i]), d1 = d(ts[i + 1]);
    if (d0 == 0 && d1 == 0) throw overlap();
    if (d0 == 0) roots.push_back(ts[i]);
    else if (d1 == 0) roots.push_back(ts[i + 1]);
    else if ((d0 < 0) != (d1 < 0)) roots.push_back(ts[i] + (ts[i + 1] - ts[i]) * d0 / (d0 - d1));
  }
  {
    Rational t1 = ts.back();
    Rational slope = a.final_velocity - b.final_velocity;
    Rational d1 = d(t1);
    if (slope == 0) {
      if (d1 == 0) throw overlap();
    } else {
      Rational r = t1 - d1 / slope;
      if (r >= t1) roots.push_back(r);
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  std::vector<Point> out;
  for (auto& t : roots) out.push_back(point_at(a, t));
  return out;
}

// ---------------------------------------------------------------------------
// Causal sets built from a diamond or a point.

enum class CausalSetKind { J_plus, J_minus, M_plus, M_minus, causal_complement, causal_hull };

struct CausalSet {
  CausalSetKind kind;
  std::variant<Diamond, Point> base;
};

namespace detail {

struct Tips {
  Point bottom, top;
  bool strict;  // open diamond
};

inline Tips tips(const std::variant<Diamond, Point>& base) {
  if (auto* d = std::get_if<Diamond>(&base)) return {d->bottom, d->top, !d->closed};
  const Point& p = std::get<Point>(base);
  return {p, p, false};
}

}  // namespace detail

inline Polygon j_plus_polygon(const std::variant<Diamond, Point>& base) {
  auto tp = detail::tips(base);
  return future_cone(tp.bottom, tp.strict);
}

inline Polygon j_minus_polygon(const std::variant<Diamond, Point>& base) {
  auto tp = detail::tips(base);
  return past_cone(tp.top, tp.strict);
}

inline bool set_contains(const CausalSet& s, const Point& p) {
  switch (s.kind) {
    case CausalSetKind::J_plus: return contains(j_plus_polygon(s.base), p);
    case CausalSetKind::J_minus: return contains(j_minus_polygon(s.base), p);
    case CausalSetKind::M_plus: return !contains(j_minus_polygon(s.base), p);
    case CausalSetKind::M_minus: return !contains(j_plus_polygon(s.base), p);
    case CausalSetKind::causal_complement:
      return !contains(j_plus_polygon(s.base), p) && !contains(j_minus_polygon(s.base), p);
    case CausalSetKind::causal_hull: {
      Polygon poly = j_plus_polygon(s.base);
      for (auto& h : j_minus_polygon(s.base)) poly.push_back(h);
      return contains(poly, p);
    }
  }
  return false;
}

inline TimeSet time_set(const Worldline& w, const CausalSet& s) {
  switch (s.kind) {
    case CausalSetKind::J_plus: return time_set(w, j_plus_polygon(s.base));
    case CausalSetKind::J_minus: return time_set(w, j_minus_polygon(s.base));
    case CausalSetKind::M_plus: return time_set(w, j_minus_polygon(s.base)).complement();
    case CausalSetKind::M_minus: return time_set(w, j_plus_polygon(s.base)).complement();
    case CausalSetKind::causal_complement:
      return time_set(w, j_plus_polygon(s.base)).united(time_set(w, j_minus_polygon(s.base))).complement();
    case CausalSetKind::causal_hull: {
      Polygon poly = j_plus_polygon(s.base);
      for (auto& h : j_minus_polygon(s.base)) poly.push_back(h);
      return time_set(w, poly);
    }
  }
  return {};
}

inline bool in_diamond(const Diamond& d, const Point& p) { return contains(diamond_polygon(d), p); }

/// True iff every point of the closure of a is spacelike to every point of the closure of b.
inline bool causally_disjoint(const Diamond& a, const Diamond& b) {
  return !causally_precedes(b.bottom, a.top) && !causally_precedes(a.bottom, b.top);
}

/// True iff for every i < j the closure of regions[j] avoids J-(closure of regions[i]).
inline bool check_causal_order(const std::vector<Diamond>& regions) {
  for (std::size_t i = 0; i < regions.size(); ++i)
    for (std::size_t j = i + 1; j < regions.size(); ++j)
      if (causally_precedes(regions[j].bottom, regions[i].top)) return false;
  return true;
}

inline Diamond domain_of_dependence(const SpacelikeInterval& iv) {
  Rational w = iv.x_hi - iv.x_lo;
  Rational mid = (iv.x_lo + iv.x_hi) / 2;
  return Diamond{Point{iv.t - w / 2, mid}, Point{iv.t + w / 2, mid}, false};
}

// ---------------------------------------------------------------------------
// Cauchy surfaces t = f(x), piecewise linear with |slope| <= 1.

struct CauchyGraph {
  std::vector<Point> breakpoints;  // sorted by x
  Rational left_slope;
  Rational right_slope;

  Rational at(const Rational& x) const {
    const auto& b = breakpoints;
    if (x <= b.front().x) return b.front().t + left_slope * (x - b.front().x);
    if (x >= b.back().x) return b.back().t + right_slope * (x - b.back().x);
    auto it = std::upper_bound(b.begin(), b.end(), x, [](const Rational& s, const Point& p) { return s < p.x; });
    const Point& hi = *it;
    const Point& lo = *(it - 1);
    return lo.t + (hi.t - lo.t) * (x - lo.x) / (hi.x - lo.x);
  }

  bool is_lipschitz() const {
    if (rabs(left_slope) > 1 || rabs(right_slope) > 1) return false;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
      Rational dx = breakpoints[i + 1].x - breakpoints[i].x;
      if (!(dx > 0) || rabs(breakpoints[i + 1].t - breakpoints[i].t) > dx) return false;
    }
    return true;
  }
};

/// Upper boundary of J-(K) for closed K.
inline Rational past_envelope(const Diamond& k, const Rational& x) { return k.top.t - rabs(x - k.top.x); }
/// Lower boundary of J+(L) for closed L.
inline Rational future_envelope(const Diamond& l, const Rational& x) { return l.bottom.t + rabs(x - l.bottom.x); }

inline CauchyGraph separating_cauchy_surface(const Diamond& k, const Diamond& l) {
  if (causally_precedes(l.bottom, k.top))
    throw Error(ErrorKind::PreconditionViolated, "L is not contained in M+ of K");
  std::vector<Rational> xs{k.top.x, l.bottom.x};
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  CauchyGraph g;
  for (auto& x : xs) g.breakpoints.push_back(Point{(past_envelope(k, x) + future_envelope(l, x)) / 2, x});
  // Far left g rises with slope 1 and h falls with slope -1, so f is flat; same on the right.
  g.left_slope = 0;
  g.right_slope = 0;
  return g;
}

// ---------------------------------------------------------------------------
// Finite chained coverings of a worldline segment by future developments.

namespace detail {

/// Minimum of |x_a - x_b| over [t0, t1]; zero when the curves meet there.
inline Rational min_separation(const Worldline& a, const Worldline& b, const Rational& t0, const Rational& t1) {
  std::vector<Rational> ts{t0, t1};
  for (const auto& p : a.vertices)
    if (p.t > t0 && p.t < t1) ts.push_back(p.t);
  for (const auto& p : b.vertices)
    if (p.t > t0 && p.t < t1) ts.push_back(p.t);
  std::sort(ts.begin(), ts.end());
  std::optional<Rational> best;
  std::optional<bool> sign;
  for (auto& t : ts) {
    Rational d = x_at(a, t) - x_at(b, t);
    if (d == 0) return 0;
    bool neg = d < 0;
    if (sign && *sign != neg) return 0;
    sign = neg;
    if (!best || rabs(d) < *best) best = rabs(d);
  }
  return *best;
}

}  // namespace detail

struct CoverValidation {
  bool coverage = false;
  bool avoidance = false;
  bool chaining = false;
  bool ok() const { return coverage && avoidance && chaining; }
};

inline CoverValidation validate_cover(const Worldline& gamma, const Worldline& delta, const Diamond& k,
                                      const std::vector<SpacelikeInterval>& cover) {
  CoverValidation v;
  TimeSet target = time_set(gamma, diamond_polygon(closure(k)));
  TimeSet covered;
  v.avoidance = true;
  for (const auto& iv : cover) {
    Polygon dev = future_development(iv);
    covered = covered.united(time_set(gamma, dev));
    if (!time_set(delta, dev).empty()) v.avoidance = false;
  }
  v.coverage = target.minus(covered).empty();
  v.chaining = true;
  for (std::size_t i = 0; i + 1 < cover.size(); ++i) {
    const auto& next = cover[i + 1];
    Point p = point_at(gamma, next.t);
    if (p.x > next.x_lo && p.x < next.x_hi && !contains(future_development(cover[i]), p)) v.chaining = false;
  }
  return v;
}

/// Chained intervals whose future developments cover gamma within closure(K) and miss delta.
inline std::vector<SpacelikeInterval> cover_segment(const Worldline& gamma, const Worldline& delta, const Diamond& k) {
  TimeSet seg = time_set(gamma, diamond_polygon(closure(k)));
  if (seg.empty()) return {};
  Rational t0 = *seg.inf();
  Rational t1 = *seg.sup();
  Rational m = detail::min_separation(gamma, delta, t0, t1);
  if (m == 0) throw Error(ErrorKind::PreconditionViolated, "worldlines meet inside the closure of K");

  // r <= m/3 always avoids delta (|x_gamma - x_delta| is 2-Lipschitz), so halving terminates.
  Rational r = m * 3 / 4;
  for (;;) {
    std::vector<SpacelikeInterval> out;
    bool avoided = true;
    Rational s = t0;
    for (;;) {
      Rational c = x_at(gamma, s);
      SpacelikeInterval iv{s, c - r, c + r};
      if (!time_set(delta, future_development(iv)).empty()) { avoided = false; break; }
      out.push_back(iv);
      Rational exit = *time_set(gamma, future_development(iv)).sup();
      if (exit > t1) break;
      s = (s + exit) / 2;
    }
    if (avoided) return out;
    r /= 2;
  }
}

// ---------------------------------------------------------------------------
// Random exact geometry for harnesses.

inline Rational random_rational(std::mt19937_64& rng, const Rational& lo, const Rational& hi, int denom = 64) {
  std::uniform_int_distribution<int> dist(0, denom);
  return lo + (hi - lo) * Rational(dist(rng), denom);
}

/// Uniform-ish rational point strictly inside an open diamond.
inline Point random_point_in(std::mt19937_64& rng, const Diamond& d, int denom = 64) {
  // Light-cone coordinates u = t + x, v = t - x make the diamond a rectangle.
  Rational u0 = d.bottom.t + d.bottom.x, u1 = d.top.t + d.top.x;
  Rational v0 = d.bottom.t - d.bottom.x, v1 = d.top.t - d.top.x;
  std::uniform_int_distribution<int> dist(1, denom - 1);
  Rational u = u0 + (u1 - u0) * Rational(dist(rng), denom);
  Rational v = v0 + (v1 - v0) * Rational(dist(rng), denom);
  return Point{(u + v) / 2, (u - v) / 2};
}

/// A causal PL curve from p to q (q in J+(p)) with `steps` intermediate vertices.
inline std::vector<Point> random_causal_path(std::mt19937_64& rng, const Point& p, const Point& q, int steps) {
  std::vector<Point> out{p};
  Point cur = p;
  for (int i = 0; i < steps; ++i) {
    Rational t = random_rational(rng, cur.t, q.t, 16);
    Rational lo = std::max(Rational(cur.x - (t - cur.t)), Rational(q.x - (q.t - t)));
    Rational hi = std::min(Rational(cur.x + (t - cur.t)), Rational(q.x + (q.t - t)));
    Point next{t, random_rational(rng, lo, hi, 16)};
    out.push_back(next);
    cur = next;
  }
  out.push_back(q);
  return out;
}

/// Inextendible PL causal curve through p with at most `max_turns` slope changes.
inline Worldline random_inextendible_through(std::mt19937_64& rng, const Point& p, int max_turns) {
  std::uniform_int_distribution<int> count(0, max_turns);
  int turns = count(rng);
  std::uniform_int_distribution<int> split(0, turns);
  int before = split(rng);
  int after = turns - before;
  auto velocity = [&] { return random_rational(rng, -1, 1, 8); };
  auto gap = [&] { return random_rational(rng, Rational(1, 8), 2, 16); };
  std::vector<Point> back, fwd;
  Point cur = p;
  for (int i = 0; i < before; ++i) {
    Rational dt = gap();
    cur = Point{cur.t - dt, cur.x - velocity() * dt};
    back.push_back(cur);
  }
  cur = p;
  for (int i = 0; i < after; ++i) {
    Rational dt = gap();
    cur = Point{cur.t + dt, cur.x + velocity() * dt};
    fwd.push_back(cur);
  }
  Worldline w;
  w.vertices.assign(back.rbegin(), back.rend());
  w.vertices.push_back(p);
  w.vertices.insert(w.vertices.end(), fwd.begin(), fwd.end());
  w.initial_velocity = velocity();
  w.final_velocity = velocity();
  return w;
}

// ---------------------------------------------------------------------------
// Sorkin configuration checks.

struct SorkinGeometryReport {
  bool ordered = false;
  bool disjoint_ac = false;
  bool b_meets_future_of_a = false;
  bool b_meets_past_of_c = false;
  std::size_t samples = 0;
  std::size_t curves_checked = 0;
  std::size_t lemma_falsifications = 0;
  std::vector<Worldline> falsifying_curves;
};

/// Exact predicates plus a sampled check that every inextendible causal curve through O_C
/// meets the causal complement of closure(O_A) outside J+(closure(O_B)).
inline SorkinGeometryReport sorkin_geometry_check(const Diamond& a, const Diamond& b, const Diamond& c,
                                                  std::size_t samples, std::uint64_t seed) {
  SorkinGeometryReport rep;
  Diamond ca = closure(a), cb = closure(b), cc = closure(c);
  rep.ordered = check_causal_order({ca, cb, cc});
  rep.disjoint_ac = causally_disjoint(ca, cc);
  rep.b_meets_future_of_a = causally_precedes(ca.bottom, cb.top);
  rep.b_meets_past_of_c = causally_precedes(cb.bottom, cc.top);
  rep.samples = samples;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < samples; ++i) {
    Point p = random_point_in(rng, interior(c));
    for (std::size_t j = 0; j < samples; ++j) {
      Worldline w = random_inextendible_through(rng, p, 8);
      TimeSet blocked = time_set(w, future_cone(ca.bottom, false))
                            .united(time_set(w, past_cone(ca.top, false)))
                            .united(time_set(w, future_cone(cb.bottom, false)));
      ++rep.curves_checked;
      if (blocked.is_all()) {
        ++rep.lemma_falsifications;
        if (rep.falsifying_curves.size() < 8) rep.falsifying_curves.push_back(w);
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Probe routes for signalling tests.

inline Point mirror(const Point& p) { return Point{p.t, -p.x}; }
inline Diamond mirror(const Diamond& d) { return Diamond{mirror(d.bottom), mirror(d.top), d.closed}; }
inline Worldline mirror(const Worldline& w) {
  Worldline m;
  for (auto& p : w.vertices) m.vertices.push_back(mirror(p));
  m.initial_velocity = -w.initial_velocity;
  m.final_velocity = -w.final_velocity;
  return m;
}

/// A causal route in M+(O_A) ∩ M-(O_C) that meets gamma_C exactly once and later
/// gamma_A exactly once. Events are strictly inside the region so that the closed
/// diamond spanned by them is causally after closure(O_A) and before closure(O_C).
inline std::optional<Worldline> find_probe_route(const Diamond& a, const Diamond& c, const Worldline& gamma_a,
                                                 const Worldline& gamma_c) {
  if (!causally_disjoint(a, c))
    throw Error(ErrorKind::PreconditionViolated, "O_A and O_C closures are not causally disjoint");
  const Point& qa = a.top;
  const Point& pc = c.bottom;
  // On gamma_C: times not in J-(q_A) form [sigma, inf); times not in J+(p_C) form (-inf, tau).
  TimeSet past_a = time_set(gamma_c, past_cone(qa, false));
  TimeSet fut_c = time_set(gamma_c, future_cone(pc, false));
  std::optional<Rational> sigma = past_a.empty() ? std::nullopt : past_a.sup();
  std::optional<Rational> tau = fut_c.empty() ? std::nullopt : fut_c.inf();
  if (sigma && tau && !(*sigma < *tau)) return std::nullopt;

  Rational ec_t0;
  if (sigma) ec_t0 = *sigma;
  else {
    ec_t0 = std::min(qa.t, pc.t) - 1;
    if (tau && *tau <= ec_t0) ec_t0 = *tau - 1;
  }
  Point ec0 = point_at(gamma_c, ec_t0);

  // On gamma_A: I+(E_C) minus J+(p_C).
  TimeSet after = time_set(gamma_a, future_cone(ec0, true));
  TimeSet fut_c_on_a = time_set(gamma_a, future_cone(pc, false));
  TimeSet window = fut_c_on_a.empty() ? after : after.minus(fut_c_on_a);
  if (window.empty()) return std::nullopt;
  const Interval& w0 = window.parts().front();
  if (!w0.lo) return std::nullopt;
  Rational ea_t = w0.hi ? Rational((*w0.lo + *w0.hi) / 2) : Rational(*w0.lo + 1);
  Point ea = point_at(gamma_a, ea_t);

  // Move E_C off the boundary of J-(q_A), staying in I-(E_A) and before J+(p_C).
  Point ec = ec0;
  if (sigma) {
    TimeSet before_ea = time_set(gamma_c, past_cone(ea, true));
    Rational b = *before_ea.sup();
    if (tau && *tau < b) b = *tau;
    if (b > ec_t0) ec = point_at(gamma_c, (ec_t0 + b) / 2);
  }

  Rational side = ec.x - x_at(gamma_a, ec.t);
  if (side == 0) return std::nullopt;
  Rational v = side > 0 ? Rational(-1) : Rational(1);
  Worldline route{{ec, ea}, v, v};
  try {
    auto xc = worldline_intersections(route, gamma_c);
    auto xa = worldline_intersections(route, gamma_a);
    if (xc.size() != 1 || xc[0] != ec || xa.size() != 1 || xa[0] != ea) return std::nullopt;
  } catch (const Error&) {
    return std::nullopt;
  }
  return route;
}

// ---------------------------------------------------------------------------
// Randomized property suites.

struct SuiteTally {
  std::size_t checks = 0;
  std::size_t violations = 0;
};

namespace detail {

inline Diamond random_box_diamond(std::mt19937_64& rng, const Rational& span, bool closed) {
  Point b{random_rational(rng, -span, span, 16), random_rational(rng, -span, span, 16)};
  Rational hu = random_rational(rng, Rational(1, 4), 3, 16), hv = random_rational(rng, Rational(1, 4), 3, 16);
  return Diamond{b, Point{b.t + (hu + hv) / 2, b.x + (hu - hv) / 2}, closed};
}

}  // namespace detail

/// M+_O, M-_O and O^perp contain every causal curve between two of their points.
inline SuiteTally causal_convexity_suite(std::size_t trials, std::uint64_t seed) {
  SuiteTally tally;
  std::mt19937_64 rng(seed);
  const CausalSetKind kinds[] = {CausalSetKind::M_plus, CausalSetKind::M_minus, CausalSetKind::causal_complement};
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Diamond o = detail::random_box_diamond(rng, 2, std::uniform_int_distribution<int>(0, 1)(rng) == 1);
    CausalSet set{kinds[trial % 3], o};
    std::optional<Point> p, q;
    for (int k = 0; k < 200 && !q; ++k) {
      Point a{random_rational(rng, -6, 6, 8), random_rational(rng, -6, 6, 8)};
      if (!set_contains(set, a)) continue;
      Rational dt = random_rational(rng, 0, 6, 8);
      Point b{a.t + dt, a.x + random_rational(rng, -dt, dt, 8)};
      if (set_contains(set, b)) p = a, q = b;
    }
    if (!q) continue;
    ++tally.checks;
    auto path = random_causal_path(rng, *p, *q, 4);
    bool ok = true;
    for (std::size_t i = 0; i < path.size() && ok; ++i) {
      ok = set_contains(set, path[i]);
      if (ok && i + 1 < path.size())
        ok = set_contains(set, Point{(path[i].t + path[i + 1].t) / 2, (path[i].x + path[i + 1].x) / 2});
    }
    if (!ok) ++tally.violations;
  }
  return tally;
}

/// Strict envelope inequalities g_K < f < h_L at the breakpoints and at sampled x.
inline SuiteTally cauchy_surface_suite(std::size_t instances, std::size_t samples, std::uint64_t seed) {
  SuiteTally tally;
  std::mt19937_64 rng(seed);
  for (std::size_t n = 0; n < instances;) {
    Diamond k = detail::random_box_diamond(rng, 4, true), l = detail::random_box_diamond(rng, 4, true);
    if (causally_precedes(l.bottom, k.top)) continue;
    ++n;
    CauchyGraph g = separating_cauchy_surface(k, l);
    std::vector<Rational> xs;
    for (auto& b : g.breakpoints) xs.push_back(b.x);
    for (std::size_t i = 0; i < samples; ++i) xs.push_back(random_rational(rng, -20, 20, 256));
    bool ok = g.is_lipschitz();
    for (auto& x : xs) {
      ++tally.checks;
      Rational f = g.at(x);
      if (!(past_envelope(k, x) < f && f < future_envelope(l, x))) ok = false;
    }
    if (!ok) ++tally.violations;
  }
  return tally;
}

/// cover_segment output on random non-meeting straight worldlines passes validate_cover.
inline SuiteTally cover_suite(std::size_t instances, std::uint64_t seed) {
  SuiteTally tally;
  std::mt19937_64 rng(seed);
  while (tally.checks < instances) {
    Point c{random_rational(rng, -2, 2, 8), random_rational(rng, -2, 2, 8)};
    Worldline gamma = straight_worldline(c, random_rational(rng, Rational(-3, 4), Rational(3, 4), 8));
    Point d{random_rational(rng, -2, 2, 8), c.x + random_rational(rng, 1, 6, 8) * (std::uniform_int_distribution<int>(0, 1)(rng) ? 1 : -1)};
    Worldline delta = straight_worldline(d, random_rational(rng, Rational(-3, 4), Rational(3, 4), 8));
    Rational h = random_rational(rng, Rational(1, 2), 4, 8);
    Diamond k{Point{c.t - h, c.x}, Point{c.t + h, c.x}, true};
    std::vector<SpacelikeInterval> cover;
    try {
      cover = cover_segment(gamma, delta, k);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::PreconditionViolated) continue;
      throw;
    }
    ++tally.checks;
    if (cover.empty() || !validate_cover(gamma, delta, k, cover).ok()) ++tally.violations;
  }
  return tally;
}

}  // namespace causal_ops
