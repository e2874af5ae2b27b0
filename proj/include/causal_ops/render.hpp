#pragma once

// Spacetime diagrams as SVG. Time runs up the page; light cones are at 45 degrees.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "causal_ops/fv.hpp"
#include "causal_ops/scenario.hpp"

namespace causal_ops {

namespace detail {

struct Frame {
  double t_lo = -1, t_hi = 1, x_lo = -1, x_hi = 1;

  void add(double t, double x) {
    t_lo = std::min(t_lo, t);
    t_hi = std::max(t_hi, t);
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
  }
};

inline std::string num(double v) {
  if (std::abs(v) < 5e-5) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// SVG coordinates of the spacetime point (t, x).
inline std::string xy(double t, double x) { return num(x) + "," + num(-t); }

inline std::vector<std::pair<double, double>> polyline(const Worldline& w, const Frame& f) {
  std::vector<std::pair<double, double>> pts;
  auto first = w.vertices.front(), last = w.vertices.back();
  double t0 = std::min(f.t_lo, to_double(first.t)), t1 = std::max(f.t_hi, to_double(last.t));
  pts.push_back({t0, to_double(first.x) + to_double(w.initial_velocity) * (t0 - to_double(first.t))});
  for (auto& p : w.vertices) pts.push_back({to_double(p.t), to_double(p.x)});
  pts.push_back({t1, to_double(last.x) + to_double(w.final_velocity) * (t1 - to_double(last.t))});
  return pts;
}

}  // namespace detail

struct RenderStats {
  std::size_t regions = 0;
  std::size_t worldlines = 0;  // systems plus probe routes
  std::size_t probe_routes = 0;
  std::size_t light_cones = 0;
};

/// Renders regions, worldlines, probe routes with their coupling zones and the light cones of
/// interaction events. Routes listed under geometry.routes are drawn as probes when one exists.
inline std::string render_svg(const Scenario& s, RenderStats* stats = nullptr) {
  using namespace detail;
  RenderStats st;
  Frame f;
  for (auto& r : s.regions) {
    f.add(to_double(r.diamond.bottom.t), to_double(r.diamond.bottom.x));
    f.add(to_double(r.diamond.top.t), to_double(r.diamond.top.x));
    const Diamond& d = r.diamond;
    Rational hu = (d.top.t + d.top.x - d.bottom.t - d.bottom.x) / 2;
    Rational hv = (d.top.t - d.top.x - d.bottom.t + d.bottom.x) / 2;
    f.add(to_double(d.bottom.t + hu), to_double(d.bottom.x + hu));
    f.add(to_double(d.bottom.t + hv), to_double(d.bottom.x - hv));
  }
  for (auto& w : s.systems)
    for (auto& p : w.worldline.vertices) f.add(to_double(p.t), to_double(p.x));
  for (auto& m : s.fv_measurements)
    for (auto& p : m.route.vertices) f.add(to_double(p.t), to_double(p.x));
  for (auto& iv : s.intervals) {
    f.add(to_double(iv.interval.t), to_double(iv.interval.x_lo));
    f.add(to_double(iv.interval.t), to_double(iv.interval.x_hi));
  }
  double mt = 0.1 * (f.t_hi - f.t_lo), mx = 0.1 * (f.x_hi - f.x_lo);
  Frame view{f.t_lo - mt, f.t_hi + mt, f.x_lo - mx, f.x_hi + mx};

  std::ostringstream o;
  double w = view.x_hi - view.x_lo, h = view.t_hi - view.t_lo;
  double stroke = 0.004 * std::max(w, h);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << num(view.x_lo) << " " << num(-view.t_hi) << " "
    << num(w) << " " << num(h) << "\">\n";
  o << "<style>.region{fill:#4a7fb5;fill-opacity:0.18;stroke:#4a7fb5}"
       ".zone{fill:none;stroke:#c05030;stroke-dasharray:0.2,0.1}"
       ".worldline{fill:none;stroke:#222}.probe{stroke:#c05030}"
       ".cone{stroke:#888;stroke-dasharray:0.1,0.1}.axis{stroke:#bbb}.cauchy{fill:none;stroke:#5a9a5a}"
       "text{font-size:" << num(3 * stroke * 10) << "px;font-family:sans-serif}</style>\n";
  o << "<g stroke-width=\"" << num(stroke) << "\">\n";
  o << "<line class=\"axis\" x1=\"" << num(view.x_lo) << "\" y1=\"0\" x2=\"" << num(view.x_hi) << "\" y2=\"0\"/>\n";
  o << "<line class=\"axis\" x1=\"0\" y1=\"" << num(-view.t_lo) << "\" x2=\"0\" y2=\"" << num(-view.t_hi) << "\"/>\n";

  auto diamond_points = [&](const Diamond& d) {
    Rational hu = (d.top.t + d.top.x - d.bottom.t - d.bottom.x) / 2;
    Rational hv = (d.top.t - d.top.x - d.bottom.t + d.bottom.x) / 2;
    // Right corner lies along u from the bottom, left corner along v.
    Point right{d.bottom.t + hu, d.bottom.x + hu};
    Point left{d.bottom.t + hv, d.bottom.x - hv};
    return xy(to_double(d.bottom.t), to_double(d.bottom.x)) + " " + xy(to_double(right.t), to_double(right.x)) + " " +
           xy(to_double(d.top.t), to_double(d.top.x)) + " " + xy(to_double(left.t), to_double(left.x));
  };

  for (auto& r : s.regions) {
    ++st.regions;
    o << "<polygon class=\"region\" data-name=\"" << esc(r.name) << "\" points=\"" << diamond_points(r.diamond)
      << "\"/>\n";
    o << "<text x=\"" << num(to_double(r.diamond.top.x)) << "\" y=\"" << num(-to_double(r.diamond.top.t))
      << "\">" << esc(r.name) << "</text>\n";
  }
  for (auto& iv : s.intervals)
    o << "<line class=\"cauchy\" data-name=\"" << esc(iv.name) << "\" x1=\"" << num(to_double(iv.interval.x_lo))
      << "\" y1=\"" << num(-to_double(iv.interval.t)) << "\" x2=\"" << num(to_double(iv.interval.x_hi)) << "\" y2=\""
      << num(-to_double(iv.interval.t)) << "\"/>\n";

  auto draw_line = [&](const Worldline& wl, const std::string& cls, const std::string& name) {
    o << "<polyline class=\"" << cls << "\" data-name=\"" << esc(name) << "\" points=\"";
    bool first = true;
    for (auto& [t, x] : polyline(wl, view)) {
      o << (first ? "" : " ") << xy(t, x);
      first = false;
    }
    o << "\"/>\n";
    ++st.worldlines;
  };
  for (auto& sys : s.systems) draw_line(sys.worldline, "worldline", sys.label);

  auto cones = [&](const Point& e) {
    double t = to_double(e.t), x = to_double(e.x);
    double up = view.t_hi - t;
    for (int sgn : {-1, 1})
      o << "<line class=\"cone\" x1=\"" << num(x) << "\" y1=\"" << num(-t) << "\" x2=\"" << num(x + sgn * up)
        << "\" y2=\"" << num(-(t + up)) << "\"/>\n";
    ++st.light_cones;
  };

  HybridNet net = s.net();
  for (auto& m : s.fv_measurements) {
    draw_line(m.route, "worldline probe", m.name);
    ++st.probe_routes;
    if (auto* z = s.region(m.coupling_zone))
      o << "<polygon class=\"zone\" points=\"" << diamond_points(z->diamond) << "\"/>\n";
    for (auto& e : route_events(m.route, net)) cones(e.event);
  }
  for (auto& r : s.geometry.routes) {
    auto* oa = s.region(r.o_a);
    auto* oc = s.region(r.o_c);
    auto* ga = s.system(r.gamma_a);
    auto* gc = s.system(r.gamma_c);
    if (!oa || !oc || !ga || !gc) continue;
    std::optional<Worldline> probe;
    try {
      probe = find_probe_route(oa->diamond, oc->diamond, ga->worldline, gc->worldline);
    } catch (const Error&) {
    }
    if (!probe) continue;
    draw_line(*probe, "worldline probe", r.o_a + "->" + r.o_c);
    ++st.probe_routes;
    for (auto& e : route_events(*probe, net)) cones(e.event);
  }
  o << "</g>\n</svg>\n";
  if (stats) *stats = st;
  return o.str();
}

}  // namespace causal_ops
