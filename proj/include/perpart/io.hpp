#pragma once

#include "perpart/diagnostics.hpp"
#include "perpart/energy.hpp"
#include "perpart/error.hpp"
#include "perpart/grid_partition.hpp"
#include "perpart/optimizer.hpp"
#include "perpart/poly_partition.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace perpart {

/// Shortest decimal form that reads back to the same double (17 significant digits).
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace io_detail {

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::string word() {
    std::string w;
    require(static_cast<bool>(is_ >> w), "state file: unexpected end of input");
    return w;
  }
  void expect(const std::string& w) {
    const std::string got = word();
    require(got == w, "state file: expected '" + w + "', found '" + got + "'");
  }
  double real() {
    const std::string w = word();
    char* end = nullptr;
    const double x = std::strtod(w.c_str(), &end);
    require(end && *end == '\0' && !w.empty(), "state file: bad number '" + w + "'");
    return x;
  }
  long integer() {
    const std::string w = word();
    char* end = nullptr;
    const long x = std::strtol(w.c_str(), &end, 10);
    require(end && *end == '\0' && !w.empty(), "state file: bad integer '" + w + "'");
    return x;
  }
  int count(long max = 100000000) {
    const long x = integer();
    require(x >= 0 && x <= max, "state file: count out of range");
    return static_cast<int>(x);
  }
  Vec2 vec() {
    const double x = real();
    return {x, real()};
  }
  void end() {
    std::string w;
    require(!(is_ >> w), "state file: trailing content '" + w + "'");
  }

 private:
  std::istream& is_;
};

inline Lattice read_lattice(Reader& r) {
  r.expect("lattice");
  const Vec2 e1 = r.vec();
  return Lattice::planar(e1, r.vec());
}

inline void write_lattice(std::ostream& os, const Lattice& lat) {
  os << "lattice " << fmt(lat.e(0).x()) << ' ' << fmt(lat.e(0).y()) << ' ' << fmt(lat.e(1).x()) << ' '
     << fmt(lat.e(1).y()) << '\n';
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// State files.
//
// periodic-partition v1
// lattice e1x e1y e2x e2y
// [energy E]
// vertices V            then V lines "x y"
// edges E               then E lines "tail head wrap_x wrap_y m  s1x s1y ... smx smy"
// cells C               then C lines "label target shift_x shift_y k  r1 ... rk"
// Loop entries r are 1-based edge ids, negative when the edge is used backwards.
//
// periodic-grid v1
// lattice e1x e1y e2x e2y
// [energy E]
// size n N              then n lines of n labels (row j lists i = 0..n-1)

inline void write_partition(std::ostream& os, const PolyPartition& p, std::optional<double> energy = {}) {
  os << "periodic-partition v1\n";
  io_detail::write_lattice(os, p.lattice);
  if (energy) os << "energy " << fmt(*energy) << '\n';
  os << "vertices " << p.vertices.size() << '\n';
  for (const Vec2& v : p.vertices) os << fmt(v.x()) << ' ' << fmt(v.y()) << '\n';
  os << "edges " << p.edges.size() << '\n';
  for (const Edge& e : p.edges) {
    os << e.tail << ' ' << e.head << ' ' << e.wrap.x() << ' ' << e.wrap.y() << ' ' << e.samples.size();
    for (const Vec2& s : e.samples) os << ' ' << fmt(s.x()) << ' ' << fmt(s.y());
    os << '\n';
  }
  os << "cells " << p.cells.size() << '\n';
  for (const Cell& c : p.cells) {
    os << c.label << ' ' << fmt(c.target) << ' ' << c.shift.x() << ' ' << c.shift.y() << ' ' << c.loop.size();
    for (const EdgeRef& r : c.loop) os << ' ' << (r.forward ? r.edge + 1 : -(r.edge + 1));
    os << '\n';
  }
}

inline void write_grid(std::ostream& os, const GridPartition& g, std::optional<double> energy = {}) {
  os << "periodic-grid v1\n";
  io_detail::write_lattice(os, g.lattice);
  if (energy) os << "energy " << fmt(*energy) << '\n';
  os << "size " << g.n << ' ' << g.num_labels << '\n';
  for (int j = 0; j < g.n; ++j) {
    for (int i = 0; i < g.n; ++i) os << (i ? " " : "") << g.at(i, j);
    os << '\n';
  }
}

inline void write_state(std::ostream& os, const State& s, std::optional<double> energy = {}) {
  std::visit(
      [&](const auto& x) {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, PolyPartition>)
          write_partition(os, x, energy);
        else
          write_grid(os, x, energy);
      },
      s);
}

struct StateFile {
  State state;
  std::optional<double> energy;
};

inline StateFile read_state(std::istream& is) {
  io_detail::Reader r(is);
  const std::string kind = r.word();
  r.expect("v1");
  require(kind == "periodic-partition" || kind == "periodic-grid", "state file: unknown header '" + kind + "'");
  const Lattice lat = io_detail::read_lattice(r);
  std::optional<double> energy;
  std::string next = r.word();
  if (next == "energy") {
    energy = r.real();
    next = r.word();
  }
  if (kind == "periodic-grid") {
    require(next == "size", "state file: expected 'size', found '" + next + "'");
    const int n = r.count(1 << 14), nl = r.count(1 << 20);
    require(n >= 1 && nl >= 1, "state file: grid size and label count must be positive");
    GridPartition g = GridPartition::filled(lat, n, nl);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const long l = r.integer();
        require(l >= 1 && l <= nl, "state file: label out of range");
        g.at(i, j) = static_cast<int>(l);
      }
    r.end();
    validate(g);
    return {g, energy};
  }
  PolyPartition p;
  p.lattice = lat;
  require(next == "vertices", "state file: expected 'vertices', found '" + next + "'");
  p.vertices.resize(r.count());
  for (Vec2& v : p.vertices) v = r.vec();
  r.expect("edges");
  p.edges.resize(r.count());
  for (Edge& e : p.edges) {
    e.tail = static_cast<int>(r.integer());
    e.head = static_cast<int>(r.integer());
    e.wrap.x() = static_cast<int>(r.integer());
    e.wrap.y() = static_cast<int>(r.integer());
    e.samples.resize(r.count());
    for (Vec2& s : e.samples) s = r.vec();
  }
  r.expect("cells");
  p.cells.resize(r.count());
  for (Cell& c : p.cells) {
    c.label = static_cast<int>(r.integer());
    c.target = r.real();
    c.shift.x() = static_cast<int>(r.integer());
    c.shift.y() = static_cast<int>(r.integer());
    c.loop.resize(r.count());
    for (EdgeRef& ref : c.loop) {
      const long k = r.integer();
      require(k != 0 && std::labs(k) <= static_cast<long>(p.edges.size()), "state file: bad edge reference");
      ref = {static_cast<int>(std::labs(k) - 1), k > 0};
    }
  }
  r.end();
  validate(p);
  return {p, energy};
}

inline void save_state(const std::string& path, const State& s, std::optional<double> energy = {}) {
  std::ofstream os(path);
  require(static_cast<bool>(os), "cannot open '" + path + "' for writing");
  write_state(os, s, energy);
  require(static_cast<bool>(os), "write to '" + path + "' failed");
}

inline StateFile load_state(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), "cannot open '" + path + "'");
  return read_state(is);
}

// ---------------------------------------------------------------------------
// CSV.

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline void write_trace_csv(std::ostream& os, const RunTrace& t) {
  os << "iter,energy,volume_residual,grad_norm,step,event\n";
  for (const TraceRow& r : t.rows)
    os << r.iter << ',' << fmt(r.energy) << ',' << fmt(r.volume_residual) << ',' << fmt(r.grad_norm) << ','
       << fmt(r.step) << ',' << csv_quote(r.event) << '\n';
}

/// One row per cell, then a totals row.
inline void write_breakdown_csv(std::ostream& os, const EnergyBreakdown& b, const std::vector<int>& labels) {
  os << "row,area,perimeter,penalty,mu_term,total\n";
  double area = 0.0;
  for (std::size_t i = 0; i < b.per_cell.size(); ++i) {
    const CellEnergy& c = b.per_cell[i];
    area += c.area;
    os << (i < labels.size() ? labels[i] : static_cast<int>(i) + 1) << ',' << fmt(c.area) << ',' << fmt(c.perimeter)
       << ',' << fmt(c.penalty) << ",,\n";
  }
  os << "total," << fmt(area) << ',' << fmt(b.half_sum_perimeters) << ',' << fmt(b.penalty_term) << ','
     << fmt(b.mu_term) << ',' << fmt(b.total) << '\n';
}

inline void write_arcs_csv(std::ostream& os, const std::vector<EdgeArc>& arcs) {
  os << "edge,left,right,kappa,rms,length,line\n";
  for (const EdgeArc& a : arcs)
    os << a.edge << ',' << a.left << ',' << a.right << ',' << fmt(a.kappa) << ',' << fmt(a.rms) << ','
       << fmt(a.length) << ',' << (a.line ? 1 : 0) << '\n';
}

inline void write_junctions_csv(std::ostream& os, const JunctionReport& j) {
  os << "vertex,angle1,angle2,angle3,max_dev\n";
  for (const JunctionAngles& a : j.triple)
    os << a.vertex << ',' << fmt(a.angles[0]) << ',' << fmt(a.angles[1]) << ',' << fmt(a.angles[2]) << ','
       << fmt(a.max_dev) << '\n';
}

inline void write_report_text(std::ostream& os, const DiagnosticsReport& r) {
  auto opt = [](const std::optional<double>& x) { return x ? fmt(*x) : std::string("n/a"); };
  os << "junction_angle_max_dev_deg " << fmt(r.junctions.max_dev) << '\n';
  os << "triple_junctions " << r.junctions.triple.size() << '\n';
  os << "irregular_vertices " << r.junctions.irregular.size();
  for (int v : r.junctions.irregular) os << ' ' << v;
  os << '\n';
  os << "arc_fit_rms_max " << fmt(r.arc_rms_max) << '\n';
  os << "curvature_sum_max " << opt(r.curvature_sum_max) << '\n';
  os << "pressure_residual " << opt(r.pressure_residual) << '\n';
  os << "pressures";
  for (double p : r.pressures) os << ' ' << fmt(p);
  os << '\n';
  os << "diameter_ratio_max " << fmt(r.diameters.max_ratio) << '\n';
  os << "domain_diameter " << fmt(r.diameters.domain_diameter) << '\n';
  os << "domain_excess_over_2rG " << fmt(r.diameters.domain_excess) << '\n';
  os << "hausdorff_to_reference " << opt(r.hausdorff_to_reference) << '\n';
  os << "probe_trials " << r.probe.trials << '\n';
  os << "probe_evaluated " << r.probe.evaluated << '\n';
  os << "probe_worst " << fmt(r.probe.worst) << '\n';
  os << "probe " << (r.probe.vacuous ? "vacuous" : r.probe.passed() ? "passed" : "failed") << '\n';
}

// ---------------------------------------------------------------------------
// SVG: 3 x 3 periodic tiling, y axis pointing up.

struct SvgOptions {
  double width = 600.0;
  bool junctions = false;  // mark degree-3 (black) and other (red) vertices of the central copy
};

namespace io_detail {

inline std::string color(int label) {
  static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
  return palette[((label - 1) % 10 + 10) % 10];
}

struct Frame {
  double x0 = 0.0, y1 = 0.0, scale = 1.0, w = 0.0, h = 0.0;
  std::string pt(const Vec2& p) const { return fmt(scale * (p.x() - x0)) + "," + fmt(scale * (y1 - p.y())); }
};

inline Frame frame(const std::vector<Vec2>& pts, double width) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const Vec2& p : pts) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  Frame f;
  f.x0 = xmin;
  f.y1 = ymax;
  f.scale = width / std::max(xmax - xmin, 1e-300);
  f.w = width;
  f.h = f.scale * (ymax - ymin);
  return f;
}

inline void polygon(std::ostream& os, const Frame& f, const std::vector<Vec2>& poly, const std::string& fill,
                    double opacity) {
  os << "<polygon points=\"";
  for (std::size_t k = 0; k < poly.size(); ++k) os << (k ? " " : "") << f.pt(poly[k]);
  os << "\" fill=\"" << fill << "\" fill-opacity=\"" << opacity << "\" stroke=\"#000\" stroke-width=\"0.5\"/>\n";
}

}  // namespace io_detail

inline void write_svg(std::ostream& os, const PolyPartition& p, const SvgOptions& opt = {}) {
  std::vector<std::vector<Vec2>> polys;
  std::vector<int> labels;
  std::vector<bool> center;
  std::vector<Vec2> all;
  for (int j = -1; j <= 1; ++j)
    for (int i = -1; i <= 1; ++i)
      for (int ci = 0; ci < p.num_cells(); ++ci) {
        if (p.cells[ci].loop.empty()) continue;
        std::vector<Vec2> poly = cell_polygon(p, ci);
        for (Vec2& v : poly) v += p.lattice.point(Vec2i(i, j));
        all.insert(all.end(), poly.begin(), poly.end());
        polys.push_back(std::move(poly));
        labels.push_back(p.cells[ci].label);
        center.push_back(i == 0 && j == 0);
      }
  require(!all.empty(), "svg: empty partition");
  const io_detail::Frame f = io_detail::frame(all, opt.width);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(f.w) << "\" height=\"" << fmt(f.h)
     << "\" viewBox=\"0 0 " << fmt(f.w) << ' ' << fmt(f.h) << "\">\n";
  for (std::size_t k = 0; k < polys.size(); ++k)
    io_detail::polygon(os, f, polys[k], io_detail::color(labels[k]), center[k] ? 0.9 : 0.45);
  if (opt.junctions) {
    const auto inc = vertex_incidence(p);
    for (std::size_t v = 0; v < inc.size(); ++v) {
      const std::string at = f.pt(p.vertices[v]);
      const auto comma = at.find(',');
      os << "<circle cx=\"" << at.substr(0, comma) << "\" cy=\"" << at.substr(comma + 1) << "\" r=\"3\" fill=\""
         << (inc[v].size() == 3 ? "#000" : "#d00") << "\"/>\n";
    }
  }
  os << "</svg>\n";
}

inline void write_svg(std::ostream& os, const GridPartition& g, const SvgOptions& opt = {}) {
  validate(g);
  std::vector<Vec2> all;
  for (int a : {-1, 2})
    for (int b : {-1, 2}) all.push_back(g.point(a * g.n, b * g.n));
  const io_detail::Frame f = io_detail::frame(all, opt.width);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(f.w) << "\" height=\"" << fmt(f.h)
     << "\" viewBox=\"0 0 " << fmt(f.w) << ' ' << fmt(f.h) << "\">\n";
  for (int tj = -1; tj <= 1; ++tj)
    for (int ti = -1; ti <= 1; ++ti)
      for (int p = 0; p < g.size(); ++p) {
        const double i = g.col(p) + ti * g.n, j = g.row(p) + tj * g.n;
        const std::vector<Vec2> px{g.point(i, j), g.point(i + 1, j), g.point(i + 1, j + 1), g.point(i, j + 1)};
        os << "<polygon points=\"";
        for (std::size_t k = 0; k < px.size(); ++k) os << (k ? " " : "") << f.pt(px[k]);
        os << "\" fill=\"" << io_detail::color(g.labels[p]) << "\" fill-opacity=\""
           << (ti == 0 && tj == 0 ? 0.9 : 0.45) << "\" stroke=\"none\"/>\n";
      }
  os << "</svg>\n";
}

inline void write_svg(std::ostream& os, const State& s, const SvgOptions& opt = {}) {
  std::visit([&](const auto& x) { write_svg(os, x, opt); }, s);
}

}  // namespace perpart
