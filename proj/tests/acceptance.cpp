// Acceptance run: one PASS/FAIL line per criterion. A criterion passes when
// its checks hold and it finishes inside its time budget. Exit status is the
// number of failed criteria.

#include "perpart/perpart.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace perpart;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

std::string num(double x, int digits = 3) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

const double kPerH = 2.0 * std::pow(12.0, 0.25);  // perimeter of the unit-area regular hexagon

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::vector<double> admissible_volumes(int n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  while (true) {
    std::vector<double> v(n);
    double s = 0.0;
    for (double& x : v) s += (x = u(rng));
    bool inside = true;
    for (double& x : v) {
      x += (n - s) / n;
      inside = inside && x > lo && x < hi;
    }
    if (inside) return v;
  }
}

std::vector<Vec2> random_sites(const Lattice& lat, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec2> s;
  for (int i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    s.push_back(a * lat.e(0) + b * lat.e(1));
  }
  return s;
}

// 1 -------------------------------------------------------------------------
Outcome honeycomb_identity() {
  double worst = 0.0;
  for (int n : {1, 2, 4, 6}) {
    const PolyPartition p = honeycomb(n);
    const double e = evaluate(p, EnergyModel::classical(p.targets())).total;
    worst = std::max(worst, std::abs(e - n / 2.0 * kPerH));
  }
  return {worst < 1e-9, "max |E - (N/2)Per(H)| = " + num(worst)};
}

// 2 -------------------------------------------------------------------------
Outcome stretched_invariance() {
  std::mt19937_64 rng(2024);
  double worst_e = 0.0, worst_a = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + 2 * (t % 3);
    const std::vector<double> v = admissible_volumes(n, 0.6, 1.4, rng);
    const PolyPartition p = stretched_hex_domain(v);
    worst_e = std::max(worst_e, std::abs(evaluate(p, EnergyModel::classical(v)).total - n / 2.0 * kPerH));
    const auto a = cell_areas(p);
    for (int i = 0; i < n; ++i) worst_a = std::max(worst_a, std::abs(a[i] - v[i]));
  }
  return {worst_e < 1e-9 && worst_a < 1e-10, "energy dev " + num(worst_e) + ", area dev " + num(worst_a)};
}

// 3 -------------------------------------------------------------------------
Outcome stability() {
  const std::vector<double> v{1.05, 0.95, 1.03, 0.97};
  const EnergyModel model = EnergyModel::classical(v);
  const double target = 2.0 * kPerH;
  const Lattice lat = honeycomb(4).lattice;
  std::mt19937_64 rng(5);
  double best = INFINITY;
  PolyPartition best_state;
  int failures = 0, hits = 0;
  for (int k = 0; k < 10; ++k) {
    try {
      const PolyPartition init = k < 5 ? perturb(stretched_hex_domain(v), 0.05, 100 + k)
                                       : voronoi_partition(lat, random_sites(lat, 4, rng), v);
      const PolyRun r = minimize_poly(init, model, OptimizerConfig{});
      const double e = evaluate(r.state, model).total;
      if (r.trace.max_volume_residual() > 1e-8) continue;
      if (rel(e, target) < 1e-5) ++hits;
      if (e < best) {
        best = e;
        best_state = r.state;
      }
    } catch (const Error&) {
      ++failures;
    }
  }
  if (!std::isfinite(best)) return {false, "no run finished"};
  const JunctionReport j = check_junctions(best_state);
  double rms = 0.0;
  for (const EdgeArc& a : fit_arcs(best_state)) rms = std::max(rms, a.rms);
  const bool ok = rel(best, target) < 1e-5 && j.irregular.empty() && j.max_dev < 0.05 && rms < 1e-4;
  return {ok, "best rel gap " + num(rel(best, target)) + ", angle dev " + num(j.max_dev) + " deg, arc rms " +
                  num(rms) + ", " + std::to_string(hits) + "/10 runs at the target, " + std::to_string(failures) +
                  " runs raised"};
}

// 4 -------------------------------------------------------------------------
Outcome wulff_probe() {
  const std::vector<double> v(4, 1.0);
  const EnergyModel model = EnergyModel::anisotropic(Anisotropy::ell1(), v);
  const PolyPartition grid = wulff_tiling(Anisotropy::ell1(), v);
  const double e0 = evaluate(grid, model).total;
  double lowest = INFINITY;
  for (int k = 0; k < 10; ++k) {
    try {
      const PolyRun r = minimize_poly(perturb(grid, 0.05, 300 + k), model, OptimizerConfig{});
      if (r.trace.max_volume_residual() <= 1e-8) lowest = std::min(lowest, evaluate(r.state, model).total);
    } catch (const Error&) {
    }
  }
  const bool ok = std::abs(e0 - 8.0) <= 1e-12 && lowest >= 8.0 - 1e-9;
  return {ok, "square grid E = " + num(e0, 17) + ", lowest optimized E = " + num(lowest, 12)};
}

// 5 -------------------------------------------------------------------------
Outcome lattice_descent() {
  const LatticeRun r = minimize_lattice(Lattice::square(), EnergyModel::classical({1.0}), OptimizerConfig{});
  const double e = evaluate(r.state, EnergyModel::classical({1.0})).total;
  const Lattice red = reduce(r.lattice);
  const double c = red.e(0).dot(red.e(1)) / (red.e(0).norm() * red.e(1).norm());
  double angle = std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi;
  angle = std::min(angle, 180.0 - angle);
  const bool ok = e <= 1.005 * 0.5 * kPerH && std::abs(angle - 60.0) <= 3.0;
  return {ok, "E / (Per(H)/2) = " + num(e / (0.5 * kPerH), 8) + ", reduced angle " + num(angle, 6) + " deg"};
}

// 6 -------------------------------------------------------------------------
// Quadruple loop over (pixel in E, pixel outside, lattice translate).
double brute_nonlocal(const GridPartition& g, int label, double s, double radius) {
  const Vec2 e1 = g.lattice.e(0), e2 = g.lattice.e(1);
  const int b = static_cast<int>(std::ceil(radius / std::min(e1.norm(), e2.norm()) * 2.0)) + 2;
  long double sum = 0.0L;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      if (g.at(i, j) != label) continue;
      const Vec2 x = ((i + 0.5) * e1 + (j + 0.5) * e2) / g.n;
      for (int k = 0; k < g.n; ++k)
        for (int l = 0; l < g.n; ++l) {
          if (g.at(k, l) == label) continue;
          const Vec2 y = ((k + 0.5) * e1 + (l + 0.5) * e2) / g.n;
          for (int a = -b; a <= b; ++a)
            for (int c = -b; c <= b; ++c) {
              const Vec2 t = a * e1 + c * e2;
              if (t.norm() > radius * (1.0 + 1e-12)) continue;
              const double r = (x - y + t).norm();
              if (r > 0.0) sum += std::pow(static_cast<long double>(r), -(2.0L + s));
            }
        }
    }
  const double pv = volume(g.lattice) / (g.n * g.n);
  return static_cast<double>(sum) * pv * pv;
}

Outcome nonlocal_oracle() {
  std::mt19937_64 rng(66);
  std::uniform_int_distribution<int> res(4, 12), bit(0, 1);
  const std::vector<Lattice> lats{Lattice::square(), Lattice::hexagonal(), Lattice::planar({1.0, 0.0}, {0.4, 1.1})};
  double worst = 0.0, worst_sym = 0.0;
  int fields = 0;
  for (double s : {0.3, 0.5, 0.7})
    for (int t = 0; t < 20; ++t) {
      const Lattice& lat = lats[t % lats.size()];
      GridPartition g = GridPartition::filled(lat, res(rng), 2, 1);
      for (int& l : g.labels) l = 1 + bit(rng);
      if (g.count(1) == 0 || g.count(2) == 0) g.labels[0] = 3 - g.labels[1];
      Kernel k;
      k.s = s;
      k.truncation_radius = 3.0;
      const double a = nonlocal_perimeter(g, 1, k).value, b = nonlocal_perimeter(g, 2, k).value;
      worst = std::max(worst, std::abs(a - brute_nonlocal(g, 1, s, 3.0)));
      worst_sym = std::max(worst_sym, std::abs(a - b));
      ++fields;
    }
  return {worst < 1e-10 && worst_sym < 1e-12, std::to_string(fields) + " fields, oracle dev " + num(worst) +
                                                  ", complement asymmetry " + num(worst_sym)};
}

// 7 -------------------------------------------------------------------------
// Tail integral in log-radius: int_t^inf r^{d-1} r^{-(d+s)} dr = int_0^inf t^{-s} e^{-s y} dy.
double radial_tail(int d, double s, double t) {
  const double sphere = d == 1 ? 2.0 : d == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
  const double top = 60.0 / s;
  const int m = 200000;
  const double h = top / m;
  double acc = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * std::exp(-s * i * h);
  }
  return sphere * std::pow(t, -s) * acc * h / 3.0;
}

Outcome tail_and_lambda() {
  double worst = 0.0;
  for (int d : {1, 2, 3})
    for (double s : {0.3, 0.5, 0.7})
      for (double t : {0.25, 1.0, 4.0}) {
        Kernel k;
        k.s = s;
        k.dim = d;
        worst = std::max(worst, rel(kernel_tail(k, t), radial_tail(d, s, t)));
      }
  const Lattice lat = Lattice::hexagonal();
  const double rho = packing_radius(lat), r = 0.2 * rho, lam = 0.75;
  Kernel k;
  const double tail = kernel_tail(k, rho - 2.0 * r);
  EnergyModel local = EnergyModel::classical({1.0});
  EnergyModel nonlocal = EnergyModel::nonlocal(k, {1.0});
  const bool c1 = lambda_constant(local, lat, r) == 0.0;
  const bool c3 = lambda_constant(nonlocal, lat, r) == tail;
  local.penalized(lam);
  nonlocal.penalized(lam);
  const bool c2 = lambda_constant(local, lat, r) == lam;
  const bool c4 = lambda_constant(nonlocal, lat, r) == lam + tail;
  const bool closed = rel(tail, 2.0 * std::numbers::pi * std::pow(rho - 2.0 * r, -0.5) / 0.5) < 1e-13;
  return {worst < 1e-6 && c1 && c2 && c3 && c4 && closed,
          "max tail rel dev " + num(worst) + ", lambda cases " + (c1 && c2 && c3 && c4 ? "exact" : "mismatch")};
}

// 8 -------------------------------------------------------------------------
Outcome island_merges() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> nl(2, 4), count(1, 8), any(0, 1 << 20), side(1, 3), res(12, 32);
  int merges = 0, bad = 0, stuck = 0;
  for (int t = 0; t < 100; ++t) {
    const int labels = nl(rng), n = res(rng);
    GridPartition g = GridPartition::filled(t % 2 ? Lattice::square() : Lattice::planar({1, 0}, {0.3, 0.9}), n,
                                            labels, 1);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) g.at(i, j) = 1 + i * labels / n;
    const int islands = count(rng);
    for (int k = 0; k < islands; ++k) {
      const int i0 = any(rng) % n, j0 = any(rng) % n, w = side(rng), h = side(rng), lab = 1 + any(rng) % labels;
      for (int dj = 0; dj < h; ++dj)
        for (int di = 0; di < w; ++di) g.at((i0 + di) % n, (j0 + dj) % n) = lab;
    }
    for (int guard = 0;; ++guard) {
      if (guard > n * n) {
        ++stuck;
        break;
      }
      const MergeResult r = merge_step(g);
      if (!r.applied) {
        if (r.status != MergeStatus::all_simple || !all_simple(g)) ++stuck;
        break;
      }
      const double before = sum_perimeters(g), after = sum_perimeters(r.grid);
      const int comps_before = decompose(g, r.from).count(), comps_after = decompose(r.grid, r.from).count();
      if (!(after < before) || !(comps_after < comps_before)) ++bad;
      g = r.grid;
      ++merges;
    }
  }
  return {bad == 0 && stuck == 0, std::to_string(merges) + " merges, " + std::to_string(bad) +
                                      " non-decreasing, " + std::to_string(stuck) + " grids not simplified"};
}

// 9 -------------------------------------------------------------------------
Outcome minimality() {
  const PolyPartition hc = honeycomb(4);
  const ProbeResult r = minimality_probe(hc, EnergyModel::classical(hc.targets()), {200, 9, true});
  return {!r.vacuous && r.passed(1e-9), std::to_string(r.evaluated) + "/200 admissible competitors, worst " +
                                            num(r.worst)};
}

// 10 ------------------------------------------------------------------------
Outcome twoblock() {
  const int n = 4;
  const double honey = n * n / 2.0 * kPerH;
  double prev_gap = 0.0;
  bool ok = true;
  std::ostringstream d;
  for (double delta : {0.1, 0.2, 0.3, 0.4}) {
    const TwoBlock tb = twoblock_competitor(n, delta);
    const double gap = honey - tb.leading;
    ok = ok && tb.leading < honey && tb.energy <= tb.bound && gap > prev_gap;
    d << "d=" << delta << " leading " << num(tb.leading, 6) << ' ';
    prev_gap = gap;
  }
  d << "vs " << num(honey, 6);
  return {ok, d.str()};
}

// 11 ------------------------------------------------------------------------
Outcome gradients() {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    PolyPartition p;
    std::vector<double> v;
    if (t % 4 == 0) {
      p = perturb(honeycomb(4, 4), 0.08, t);
    } else if (t % 4 == 1) {
      p = perturb(stretched_hex_domain({1.2, 0.8, 1.0}, 5), 0.06, t);
    } else {
      const Lattice lat = t % 4 == 2 ? Lattice::hexagonal(3.0) : Lattice::planar({1.7, 0.1}, {0.5, 1.6});
      std::vector<double> eq(3, volume(lat) / 3.0);
      p = perturb(voronoi_partition(lat, random_sites(lat, 3, rng), eq, 4), 0.03, t);
    }
    EnergyModel m = EnergyModel::classical(p.targets());
    if (t % 5 == 1) m = EnergyModel::anisotropic(Anisotropy::hexagonal(), p.targets());
    if (t % 5 == 2) m.mu = 0.3;
    if (t % 5 == 3) {
      std::vector<double> off = p.targets();
      off[0] += 0.05;
      off[1] -= 0.05;
      m = EnergyModel::classical(off);
      m.penalized(2.0);
    }
    const Eigen::VectorXd g = gradient(p, m), x = p.positions();
    Eigen::VectorXd fd(x.size());
    const double h = 1e-6;
    PolyPartition q = p;
    for (int i = 0; i < x.size(); ++i) {
      Eigen::VectorXd y = x;
      y(i) += h;
      q.set_positions(y);
      const double ep = evaluate(q, m).total;
      y(i) -= 2.0 * h;
      q.set_positions(y);
      fd(i) = (ep - evaluate(q, m).total) / (2.0 * h);
    }
    worst = std::max(worst, (g - fd).norm() / g.norm());
  }
  return {worst < 1e-4, "max relative gradient error " + num(worst)};
}

// 12 ------------------------------------------------------------------------
bool same_trace(const RunTrace& a, const RunTrace& b) {
  if (a.rows.size() != b.rows.size() || a.status != b.status) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const TraceRow &x = a.rows[i], &y = b.rows[i];
    if (x.iter != y.iter || x.energy != y.energy || x.volume_residual != y.volume_residual ||
        x.grad_norm != y.grad_norm || x.step != y.step || x.event != y.event)
      return false;
  }
  return true;
}

std::string text_of(const State& s) {
  std::ostringstream os;
  write_state(os, s);
  return os.str();
}

Outcome determinism() {
  const std::vector<double> v{1.05, 0.95, 1.03, 0.97};
  const Lattice lat = honeycomb(4).lattice;
  std::mt19937_64 r1(12), r2(12);
  const PolyPartition a = voronoi_partition(lat, random_sites(lat, 4, r1), v);
  const PolyPartition b = voronoi_partition(lat, random_sites(lat, 4, r2), v);
  OptimizerConfig cfg;
  cfg.seed = 99;
  const PolyRun ra = minimize_poly(a, EnergyModel::classical(v), cfg);
  const PolyRun rb = minimize_poly(b, EnergyModel::classical(v), cfg);
  const bool poly = same_trace(ra.trace, rb.trace) && text_of(ra.state) == text_of(rb.state);

  GridPartition g = rasterize(honeycomb(3), 18);
  cfg.anneal = true;
  const EnergyModel gm = EnergyModel::classical(std::vector<double>(3, volume(g.lattice) / 3.0));
  const GridRun ga = minimize_grid(g, gm, cfg), gb = minimize_grid(g, gm, cfg);
  const bool grid = same_trace(ga.trace, gb.trace) && ga.state.labels == gb.state.labels;

  bool round = true;
  for (const State& s : {State{ra.state}, State{perturb(honeycomb(6), 0.04, 3)}, State{ga.state}}) {
    const std::string t = text_of(s);
    std::istringstream is(t);
    const StateFile f = read_state(is);
    round = round && text_of(f.state) == t;
    if (const auto* p = std::get_if<PolyPartition>(&s)) {
      const auto& q = std::get<PolyPartition>(f.state);
      const EnergyModel m = EnergyModel::classical(p->targets());
      round = round && (p->positions().array() == q.positions().array()).all() &&
              evaluate(*p, m).total == evaluate(q, m).total;
    }
  }
  return {poly && grid && round, std::string("poly traces ") + (poly ? "identical" : "differ") + ", grid traces " +
                                     (grid ? "identical" : "differ") + ", round trip " +
                                     (round ? "bit-exact" : "lossy")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {"honeycomb energy identity", 1, honeycomb_identity},
      {"stretched-hexagon invariance", 5, stretched_invariance},
      {"stability experiment", 300, stability},
      {"l1 Wulff tiling optimality probe", 120, wulff_probe},
      {"lattice descent recovers the hexagonal lattice", 300, lattice_descent},
      {"non-local oracle equivalence", 60, nonlocal_oracle},
      {"tail and Lambda closed forms", 1, tail_and_lambda},
      {"island merging surgery", 30, island_merges},
      {"minimality probe", 120, minimality},
      {"two-block competitor", 60, twoblock},
      {"gradient correctness", 60, gradients},
      {"determinism and round trip", 10, determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = all[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= all[i].budget_s;
    const bool ok = o.ok && in_time;
    failed += !ok;
    std::printf("criterion %2zu %s: %s; %s; %.2f s of %.0f s%s\n", i + 1, ok ? "PASS" : "FAIL", all[i].name,
                o.detail.c_str(), secs, all[i].budget_s, in_time ? "" : " (over budget)");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed;
}
