// perpart_cli: constructions, evaluation, minimization, diagnostics and sweeps
// for periodic partitions. One state file in, one out.

#include "perpart/perpart.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace perpart;

namespace {

// ---------------------------------------------------------------------------
// JSON config files for CLI11: {"command": <subcommand>, <option>: value, ...}.
// Keys are option names; arrays give multi-valued options. Manifests use
// the same layout, so `--config manifest.json` replays a run.

class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j = json::object();
    j["command"] = app->get_name();
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_configurable()) continue;
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "config") continue;
      if (opt->get_type_size() != 0) {
        const std::string def = opt->get_default_str();
        if (opt->count() == 1)
          j[name] = opt->results().at(0);
        else if (opt->count() > 1)
          j[name] = opt->results();
        else if (default_also && !def.empty() && def != "{}" && def != "[]")
          j[name] = def;
      } else if (opt->count() > 0 || default_also) {
        j[name] = opt->count() > 0;
      }
    }
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    if (!j.is_object() || !j.contains("command") || !j["command"].is_string())
      throw CLI::ConversionError("config: expected an object with a \"command\" string");
    const std::string command = j["command"].get<std::string>();
    std::vector<CLI::ConfigItem> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "command") continue;
      CLI::ConfigItem item;
      item.parents = {command};
      item.name = it.key();
      if (it->is_array()) {
        for (const json& x : *it) item.inputs.push_back(scalar(x, it.key()));
      } else {
        item.inputs.push_back(scalar(*it, it.key()));
      }
      out.push_back(std::move(item));
    }
    return out;
  }

 private:
  static std::string scalar(const json& x, const std::string& key) {
    if (x.is_string()) return x.get<std::string>();
    if (x.is_boolean()) return x.get<bool>() ? "true" : "false";
    if (x.is_number()) return x.dump();
    throw CLI::ConversionError("config: unsupported value for key " + key);
  }
};

// ---------------------------------------------------------------------------
// Output helpers

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    require(static_cast<bool>(os), "cannot write " + tmp.string());
    os << text;
    require(static_cast<bool>(os), "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <class F>
std::string render(F&& f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

// ---------------------------------------------------------------------------
// Shared option groups

struct Common {
  std::string out = ".";
  std::uint64_t seed = 1;
};

struct ModelOpts {
  std::string perimeter = "classical";
  double s = 0.5;
  double truncation = 0.0;
  double mu = 0.0;
  double lambda = 0.0;
  std::vector<double> volumes;
};

struct OptOpts {
  OptimizerConfig cfg;
  std::string step_rule = "backtracking";
  bool no_surgery = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "64-bit seed for every random choice");
}

void add_model(CLI::App* app, ModelOpts& m) {
  app->add_option("--perimeter", m.perimeter, "classical | ell1 | hexagonal | nonlocal")
      ->check(CLI::IsMember({"classical", "ell1", "hexagonal", "nonlocal"}));
  app->add_option("--s", m.s, "fractional kernel exponent");
  app->add_option("--truncation", m.truncation, "kernel truncation radius (0 = default)");
  app->add_option("--mu", m.mu, "weight of Per(D)");
  app->add_option("--lambda", m.lambda, "volume penalty; 0 keeps volumes constrained");
  app->add_option("--volumes", m.volumes, "cell volumes (default: from the state)")->delimiter(',');
}

void add_optimizer(CLI::App* app, OptOpts& o) {
  OptimizerConfig& c = o.cfg;
  app->add_option("--max-iters", c.max_iters);
  app->add_option("--step-rule", o.step_rule)->check(CLI::IsMember({"fixed", "backtracking"}));
  app->add_option("--step", c.step);
  app->add_option("--armijo", c.armijo);
  app->add_option("--tol-grad", c.tol_grad);
  app->add_option("--tol-volume", c.tol_volume);
  app->add_option("--memory", c.memory, "L-BFGS pairs, 0 = steepest descent");
  app->add_option("--resample-interval", c.resample_interval);
  app->add_option("--surgery-edge-min", c.surgery_edge_min);
  app->add_flag("--no-surgery", o.no_surgery);
  app->add_flag("--anneal", c.anneal, "grid runs: Metropolis sweeps before descent");
  app->add_option("--anneal-temperature", c.anneal_temperature);
  app->add_option("--anneal-sweeps", c.anneal_sweeps);
}

OptimizerConfig resolve(const OptOpts& o, std::uint64_t seed) {
  OptimizerConfig c = o.cfg;
  c.step_rule = o.step_rule == "fixed" ? StepRule::fixed : StepRule::backtracking;
  c.surgery = !o.no_surgery;
  c.seed = seed;
  c.validate();
  return c;
}

EnergyModel make_model(const ModelOpts& m, std::vector<double> fallback) {
  const std::vector<double> v = m.volumes.empty() ? std::move(fallback) : m.volumes;
  EnergyModel model;
  if (m.perimeter == "classical") {
    model = EnergyModel::classical(v);
  } else if (m.perimeter == "ell1") {
    model = EnergyModel::anisotropic(Anisotropy::ell1(), v);
  } else if (m.perimeter == "hexagonal") {
    model = EnergyModel::anisotropic(Anisotropy::hexagonal(), v);
  } else {
    Kernel k;
    k.s = m.s;
    k.truncation_radius = m.truncation;
    model = EnergyModel::nonlocal(k, v);
  }
  model.mu = m.mu;
  if (m.lambda > 0.0) model.penalized(m.lambda);
  return model;
}

std::vector<double> default_volumes(const State& s) {
  if (const auto* p = std::get_if<PolyPartition>(&s)) return p->targets();
  const auto& g = std::get<GridPartition>(s);
  std::vector<double> v;
  for (int l = 1; l <= g.num_labels; ++l) v.push_back(g.label_volume(l));
  return v;
}

/// "zd" / "square", "hex", or "e1x,e1y,e2x,e2y". Named lattices are scaled
/// to the requested volume.
Lattice parse_lattice(const std::string& text, double vol) {
  if (text == "zd" || text == "square") return Lattice::square(std::sqrt(vol));
  if (text == "hex") return Lattice::hexagonal(vol);
  std::vector<double> x;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    char* end = nullptr;
    x.push_back(std::strtod(tok.c_str(), &end));
    require(end != tok.c_str() && *end == '\0', "lattice: bad number '" + tok + "'");
  }
  require(x.size() == 4, "lattice: expected zd, hex or four comma-separated numbers");
  const Lattice lat = Lattice::planar({x[0], x[1]}, {x[2], x[3]});
  require(volume(lat) > 0.0, "lattice: degenerate basis");
  return lat;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

void finish(const CLI::App* app, const Common& c) {
  write_atomic(fs::path(c.out) / "manifest.json", app->config_to_str(true, false));
}

StateFile load(const std::string& path) {
  require(!path.empty(), "--in is required");
  return load_state(path);
}

void print_run(const RunTrace& t) {
  std::cout << "status " << to_string(t.status) << "\nenergy " << fmt(t.final_energy()) << "\niterations "
            << t.accepted << "\nvolume_residual " << fmt(t.rows.empty() ? 0.0 : t.rows.back().volume_residual)
            << '\n';
}

// ---------------------------------------------------------------------------
// construct

struct ConstructOpts {
  Common c;
  std::string preset;
  int n = 4;
  int samples = kDefaultSamples;
  std::vector<double> volumes;
  std::string lattice;
  std::string anisotropy = "ell1";
  double delta = 0.1;
  double amplitude = 0.0;
  int res = 32;
  int islands = 0;
};

std::vector<double> equal_volumes(int n, double each = 1.0) { return std::vector<double>(n, each); }

std::vector<Vec2> random_sites(const Lattice& lat, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec2> sites;
  for (int i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    sites.push_back(a * lat.e(0) + b * lat.e(1));
  }
  return sites;
}

int run_construct(const CLI::App* app, const ConstructOpts& o) {
  std::mt19937_64 rng(o.c.seed);
  State state;
  EnergyModel model;
  const std::string& p = o.preset;
  if (p == "grid") {
    require(o.n >= 1 && o.res >= 1, "grid: need --n >= 1 and --res >= 1");
    const Lattice lat = o.lattice.empty() ? Lattice::square() : parse_lattice(o.lattice, 1.0);
    const double each = volume(lat) / o.n;
    GridPartition g =
        o.n == 1 ? GridPartition::filled(lat, o.res, 1)
                 : rasterize(voronoi_partition(lat, random_sites(lat, o.n, rng), equal_volumes(o.n, each), 1), o.res);
    std::uniform_int_distribution<int> pix(0, o.res * o.res - 1), lab(1, o.n);
    for (int k = 0; k < o.islands; ++k) g.labels[pix(rng)] = lab(rng);
    model = EnergyModel::classical(equal_volumes(o.n, each));
    state = g;
  } else {
    PolyPartition part;
    if (p == "honeycomb") {
      part = honeycomb(o.n, o.samples);
    } else if (p == "stretched-hex") {
      part = stretched_hex_domain(o.volumes.empty() ? equal_volumes(o.n) : o.volumes, o.samples);
    } else if (p == "slab") {
      const std::vector<double> v = o.volumes.empty() ? equal_volumes(o.n, 1.0 / o.n) : o.volumes;
      part = slab_partition(parse_lattice(o.lattice.empty() ? "zd" : o.lattice, sum(v)), v, o.samples);
    } else if (p == "wulff") {
      const Anisotropy a = o.anisotropy == "hexagonal" ? Anisotropy::hexagonal() : Anisotropy::ell1();
      part = wulff_tiling(a, o.volumes.empty() ? equal_volumes(o.n) : o.volumes, o.samples);
    } else if (p == "voronoi") {
      std::vector<double> v = o.volumes.empty() ? equal_volumes(o.n) : o.volumes;
      const Lattice lat = parse_lattice(o.lattice.empty() ? "hex" : o.lattice, sum(v));
      if (o.volumes.empty()) v = equal_volumes(o.n, volume(lat) / o.n);
      part = voronoi_partition(lat, random_sites(lat, static_cast<int>(v.size()), rng), v, o.samples);
    } else if (p == "twoblock") {
      const TwoBlock tb = twoblock_competitor(o.n, o.delta, std::nullopt, o.samples);
      std::cout << "leading " << fmt(tb.leading) << "\nmeasured " << fmt(tb.energy) << "\nC " << fmt(tb.c)
                << "\nbound " << fmt(tb.bound) << "\nhoneycomb " << fmt(o.n * o.n * hexagon_perimeter() / 2.0)
                << '\n';
      part = tb.partition;
    } else if (p == "junction-candidate") {
      part = junction_candidate(o.volumes.empty() ? std::vector<double>{0.9, 0.1} : o.volumes, o.samples);
    } else {
      throw Error(ErrorKind::invalid_input, "unknown preset " + p);
    }
    part = perturb(part, o.amplitude, o.c.seed);
    model = p == "wulff" ? EnergyModel::anisotropic(
                               o.anisotropy == "hexagonal" ? Anisotropy::hexagonal() : Anisotropy::ell1(),
                               part.targets())
                         : EnergyModel::classical(part.targets());
    state = part;
  }
  const double e = evaluate(state, model).total;
  std::cout << "energy " << fmt(e) << '\n';
  write_atomic(fs::path(o.c.out) / "state.txt", render([&](std::ostream& os) { write_state(os, state, e); }));
  write_atomic(fs::path(o.c.out) / "state.svg", render([&](std::ostream& os) { write_svg(os, state); }));
  finish(app, o.c);
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate / minimize / minimize-lattice

struct EvalOpts {
  Common c;
  ModelOpts m;
  std::string in;
};

int run_evaluate(const CLI::App* app, const EvalOpts& o) {
  const StateFile f = load(o.in);
  const EnergyModel model = make_model(o.m, default_volumes(f.state));
  const EnergyBreakdown b = evaluate(f.state, model);
  std::vector<int> labels;
  if (const auto* p = std::get_if<PolyPartition>(&f.state))
    for (const Cell& c : p->cells) labels.push_back(c.label);
  std::cout << "energy " << fmt(b.total) << "\nvolume_residual " << fmt(b.volume_residual) << '\n';
  write_atomic(fs::path(o.c.out) / "breakdown.csv", render([&](std::ostream& os) { write_breakdown_csv(os, b, labels); }));
  finish(app, o.c);
  return 0;
}

struct MinOpts {
  Common c;
  ModelOpts m;
  OptOpts o;
  std::string in;
};

void write_run(const Common& c, const State& s, const RunTrace& t) {
  write_atomic(fs::path(c.out) / "state.txt", render([&](std::ostream& os) { write_state(os, s, t.final_energy()); }));
  write_atomic(fs::path(c.out) / "trace.csv", render([&](std::ostream& os) { write_trace_csv(os, t); }));
  write_atomic(fs::path(c.out) / "state.svg", render([&](std::ostream& os) { write_svg(os, s); }));
}

int run_minimize(const CLI::App* app, const MinOpts& o) {
  const StateFile f = load(o.in);
  const EnergyModel model = make_model(o.m, default_volumes(f.state));
  const OptimizerConfig cfg = resolve(o.o, o.c.seed);
  if (const auto* p = std::get_if<PolyPartition>(&f.state)) {
    const PolyRun r = minimize_poly(*p, model, cfg);
    print_run(r.trace);
    write_run(o.c, r.state, r.trace);
  } else {
    const GridRun r = minimize_grid(std::get<GridPartition>(f.state), model, cfg);
    print_run(r.trace);
    write_run(o.c, r.state, r.trace);
  }
  finish(app, o.c);
  return 0;
}

struct LatOpts {
  MinOpts base;
  std::string lattice = "zd";
};

int run_minimize_lattice(const CLI::App* app, const LatOpts& lo) {
  const MinOpts& o = lo.base;
  const OptimizerConfig cfg = resolve(o.o, o.c.seed);
  LatticeRun r;
  if (!o.in.empty()) {
    const StateFile f = load(o.in);
    const auto* p = std::get_if<PolyPartition>(&f.state);
    require(p != nullptr, "minimize-lattice: needs a polygonal state");
    r = minimize_lattice(*p, make_model(o.m, p->targets()), cfg);
  } else {
    const std::vector<double> v = o.m.volumes.empty() ? std::vector<double>{1.0} : o.m.volumes;
    r = minimize_lattice(parse_lattice(lo.lattice, sum(v)), make_model(o.m, v), cfg);
  }
  const Lattice red = reduce(r.lattice);
  const double angle =
      std::acos(std::clamp(red.e(0).dot(red.e(1)) / (red.e(0).norm() * red.e(1).norm()), -1.0, 1.0)) * 180.0 /
      std::numbers::pi;
  print_run(r.trace);
  std::cout << "lattice " << fmt(red.e(0).x() + 0.0) << ' ' << fmt(red.e(0).y() + 0.0) << ' ' << fmt(red.e(1).x() + 0.0) << ' '
            << fmt(red.e(1).y() + 0.0) << "\nreduced_angle_deg " << fmt(std::min(angle, 180.0 - angle)) << '\n';
  write_run(o.c, r.state, r.trace);
  finish(app, o.c);
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose / decompose / export-svg

struct DiagOpts {
  Common c;
  ModelOpts m;
  std::string in, reference;
  int trials = 100;
};

int run_diagnose(const CLI::App* app, const DiagOpts& o) {
  const StateFile f = load(o.in);
  std::string report;
  if (const auto* p = std::get_if<PolyPartition>(&f.state)) {
    std::optional<PolyPartition> ref;
    if (!o.reference.empty()) {
      const StateFile rf = load_state(o.reference);
      require(std::holds_alternative<PolyPartition>(rf.state), "diagnose: reference must be polygonal");
      ref = std::get<PolyPartition>(rf.state);
    }
    const DiagnosticsReport r =
        diagnose(*p, make_model(o.m, p->targets()), {o.trials, o.c.seed, true}, ref ? &*ref : nullptr);
    report = render([&](std::ostream& os) { write_report_text(os, r); });
    write_atomic(fs::path(o.c.out) / "arcs.csv", render([&](std::ostream& os) { write_arcs_csv(os, r.arcs); }));
    write_atomic(fs::path(o.c.out) / "junctions.csv",
                 render([&](std::ostream& os) { write_junctions_csv(os, r.junctions); }));
    write_atomic(fs::path(o.c.out) / "diagnose.svg",
                 render([&](std::ostream& os) { write_svg(os, *p, SvgOptions{600.0, true}); }));
  } else {
    const DiameterReport d = diameter_bound_check(std::get<GridPartition>(f.state));
    report = render([&](std::ostream& os) {
      os << "components " << d.cells.size() << "\ndiameter_ratio_max " << fmt(d.max_ratio) << "\ndomain_diameter "
         << fmt(d.domain_diameter) << "\ndomain_excess_over_2rG " << fmt(d.domain_excess) << '\n';
    });
  }
  std::cout << report;
  write_atomic(fs::path(o.c.out) / "report.txt", report);
  finish(app, o.c);
  return 0;
}

struct DecompOpts {
  Common c;
  std::string in;
  bool merge = false;
  int max_merges = 10000;
};

int run_decompose(const CLI::App* app, const DecompOpts& o) {
  const StateFile f = load(o.in);
  const auto* gp = std::get_if<GridPartition>(&f.state);
  require(gp != nullptr, "decompose: needs a grid state");
  GridPartition g = *gp;
  std::ostringstream merges;
  merges << "step,into,from,component,shared_length,delta_sum_perimeters\n";
  int steps = 0;
  if (o.merge) {
    for (; steps < o.max_merges; ++steps) {
      const MergeResult r = merge_step(g);
      if (!r.applied) {
        std::cout << "merge_status " << (r.status == MergeStatus::all_simple ? "all_simple" : "no_candidate") << '\n';
        break;
      }
      merges << steps + 1 << ',' << r.into << ',' << r.from << ',' << r.component << ',' << fmt(r.shared_length) << ','
             << fmt(r.delta_sum_perimeters) << '\n';
      g = r.grid;
    }
    write_atomic(fs::path(o.c.out) / "merges.csv", merges.str());
    write_atomic(fs::path(o.c.out) / "state.txt",
                 render([&](std::ostream& os) { write_grid(os, g, sum_perimeters(g) / 2.0); }));
  }
  std::ostringstream comps;
  comps << "label,component,pixels,volume,saturated_pixels\n";
  for (int l = 1; l <= g.num_labels; ++l) {
    const ComponentDecomposition d = decompose(g, l);
    for (int k = 0; k < d.count(); ++k)
      comps << l << ',' << k + 1 << ',' << d.components[k].size() << ','
            << fmt(d.components[k].size() * g.pixel_volume()) << ',' << saturate(g, d.components[k]).size() << '\n';
  }
  std::cout << "merges " << steps << "\nall_simple " << (all_simple(g) ? "yes" : "no") << '\n';
  write_atomic(fs::path(o.c.out) / "components.csv", comps.str());
  finish(app, o.c);
  return 0;
}

struct SvgOpts {
  Common c;
  std::string in, svg = "state.svg";
  double width = 600.0;
  bool junctions = false;
};

int run_export_svg(const CLI::App* app, const SvgOpts& o) {
  const StateFile f = load(o.in);
  write_atomic(fs::path(o.c.out) / o.svg,
               render([&](std::ostream& os) { write_svg(os, f.state, SvgOptions{o.width, o.junctions}); }));
  finish(app, o.c);
  return 0;
}

// ---------------------------------------------------------------------------
// sweeps; independent runs fan out over std::async, rows keep input order

struct DeltaOpts {
  Common c;
  OptOpts o;
  int n = 4;
  std::vector<double> deltas{0.0, 0.05, 0.1, 0.2, 0.3, 0.4};
  int starts = 2;
  double amplitude = 0.02;
};

int run_sweep_delta(const CLI::App* app, const DeltaOpts& o) {
  const OptimizerConfig cfg = resolve(o.o, o.c.seed);
  const double honey = o.n * o.n * hexagon_perimeter() / 2.0;
  auto row = [&](double delta) {
    const std::vector<double> v = detail::twoblock_volumes(o.n, delta);
    const EnergyModel model = EnergyModel::classical(v);
    const PolyPartition hex = stretched_hex_domain(v);
    const double stretched = evaluate(hex, model).total;
    const TwoBlock tb = twoblock_competitor(o.n, delta);
    double best = INFINITY;
    for (int k = 0; k < o.starts; ++k) {
      OptimizerConfig c = cfg;
      c.seed = o.c.seed + k;
      best = std::min(best, minimize_poly(perturb(hex, o.amplitude, c.seed), model, c).trace.final_energy());
    }
    std::ostringstream os;
    os << fmt(delta) << ',' << fmt(honey) << ',' << fmt(stretched) << ',' << fmt(tb.leading) << ','
       << fmt(tb.energy) << ',' << fmt(tb.bound) << ',' << (o.starts > 0 ? fmt(best) : "") << ','
       << (tb.leading < honey ? 1 : 0) << ',' << (tb.energy < honey ? 1 : 0) << '\n';
    return os.str();
  };
  std::vector<std::future<std::string>> jobs;
  for (double d : o.deltas) jobs.push_back(std::async(std::launch::async, row, d));
  std::string csv =
      "delta,honeycomb,stretched_hex,competitor_leading,competitor_energy,competitor_bound,optimizer_best,"
      "leading_beats_honeycomb,competitor_beats_honeycomb\n";
  for (auto& j : jobs) csv += j.get();
  std::cout << csv;
  write_atomic(fs::path(o.c.out) / "sweep_delta.csv", csv);
  finish(app, o.c);
  return 0;
}

struct LambdaOpts {
  Common c;
  ModelOpts m;
  OptOpts o;
  std::string in;
  std::vector<double> lambdas{0.5, 1.0, 2.0, 4.0, 8.0};
};

int run_sweep_lambda(const CLI::App* app, const LambdaOpts& o) {
  const StateFile f = load(o.in);
  const OptimizerConfig cfg = resolve(o.o, o.c.seed);
  auto row = [&](double lam) {
    require(lam > 0.0, "sweep-lambda: lambda values must be > 0");
    ModelOpts m = o.m;
    m.lambda = lam;
    const EnergyModel model = make_model(m, default_volumes(f.state));
    RunTrace t;
    EnergyBreakdown b;
    if (const auto* p = std::get_if<PolyPartition>(&f.state)) {
      const PolyRun r = minimize_poly(*p, model, cfg);
      t = r.trace;
      b = evaluate(r.state, model);
    } else {
      const GridRun r = minimize_grid(std::get<GridPartition>(f.state), model, cfg);
      t = r.trace;
      b = evaluate(r.state, model);
    }
    std::ostringstream os;
    os << fmt(lam) << ',' << fmt(b.total) << ',' << fmt(b.half_sum_perimeters) << ',' << fmt(b.penalty_term) << ','
       << fmt(b.volume_residual) << ',' << to_string(t.status) << '\n';
    return os.str();
  };
  std::vector<std::future<std::string>> jobs;
  for (double lam : o.lambdas) jobs.push_back(std::async(std::launch::async, row, lam));
  std::string csv = "lambda,energy,half_sum_perimeters,penalty,volume_residual,status\n";
  for (auto& j : jobs) csv += j.get();
  std::cout << csv;
  write_atomic(fs::path(o.c.out) / "sweep_lambda.csv", csv);
  finish(app, o.c);
  return 0;
}

/// The "command" named by a --config file on the command line, if any.
std::optional<std::string> config_command(const std::vector<std::string>& args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
    else
      continue;
    std::ifstream is(path);
    if (!is) return std::nullopt;  // CLI11 reports the missing file
    const json j = json::parse(is, nullptr, false);
    if (j.is_object() && j.contains("command") && j["command"].is_string()) return j["command"].get<std::string>();
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic partitions with prescribed cell volumes", "perpart_cli"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config, e.g. a manifest.json from an earlier run");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  std::function<int()> action;

  ConstructOpts co;
  CLI::App* construct = app.add_subcommand("construct", "build a preset partition");
  add_common(construct, co.c);
  construct->add_option("preset", co.preset)
      ->required()
      ->check(CLI::IsMember({"honeycomb", "stretched-hex", "slab", "wulff", "voronoi", "twoblock",
                             "junction-candidate", "grid"}));
  construct->add_option("--n", co.n, "cells (labels for grid; row count for twoblock)");
  construct->add_option("--samples", co.samples, "interior samples per edge");
  construct->add_option("--volumes", co.volumes)->delimiter(',');
  construct->add_option("--lattice", co.lattice, "zd | hex | e1x,e1y,e2x,e2y");
  construct->add_option("--anisotropy", co.anisotropy)->check(CLI::IsMember({"ell1", "hexagonal"}));
  construct->add_option("--delta", co.delta);
  construct->add_option("--amplitude", co.amplitude, "seeded random perturbation");
  construct->add_option("--res", co.res, "grid resolution");
  construct->add_option("--islands", co.islands, "grid: random single-pixel relabelings");
  construct->callback([&] { action = [&] { return run_construct(construct, co); }; });

  EvalOpts eo;
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "energy and per-cell breakdown");
  add_common(evaluate_cmd, eo.c);
  add_model(evaluate_cmd, eo.m);
  evaluate_cmd->add_option("--in", eo.in)->required();
  evaluate_cmd->callback([&] { action = [&] { return run_evaluate(evaluate_cmd, eo); }; });

  MinOpts mo;
  CLI::App* minimize = app.add_subcommand("minimize", "descend a polygonal or grid state");
  add_common(minimize, mo.c);
  add_model(minimize, mo.m);
  add_optimizer(minimize, mo.o);
  minimize->add_option("--in", mo.in)->required();
  minimize->callback([&] { action = [&] { return run_minimize(minimize, mo); }; });

  LatOpts lo;
  CLI::App* minlat = app.add_subcommand("minimize-lattice", "descend over lattice shapes of fixed volume");
  add_common(minlat, lo.base.c);
  add_model(minlat, lo.base.m);
  add_optimizer(minlat, lo.base.o);
  minlat->add_option("--in", lo.base.in, "start state (otherwise --lattice with one cell per volume)");
  minlat->add_option("--lattice", lo.lattice);
  minlat->add_option("--lattice-step", lo.base.o.cfg.lattice_step);
  minlat->add_option("--lattice-evals", lo.base.o.cfg.lattice_evals);
  minlat->add_option("--inner-iters", lo.base.o.cfg.inner_iters);
  minlat->callback([&] { action = [&] { return run_minimize_lattice(minlat, lo); }; });

  DiagOpts dopt;
  CLI::App* diag = app.add_subcommand("diagnose", "junctions, arcs, pressures, diameters, minimality probe");
  add_common(diag, dopt.c);
  add_model(diag, dopt.m);
  diag->add_option("--in", dopt.in)->required();
  diag->add_option("--reference", dopt.reference);
  diag->add_option("--trials", dopt.trials);
  diag->callback([&] { action = [&] { return run_diagnose(diag, dopt); }; });

  DecompOpts deo;
  CLI::App* decomp = app.add_subcommand("decompose", "components of every label; optional island merging");
  add_common(decomp, deo.c);
  decomp->add_option("--in", deo.in)->required();
  decomp->add_flag("--merge", deo.merge);
  decomp->add_option("--max-merges", deo.max_merges);
  decomp->callback([&] { action = [&] { return run_decompose(decomp, deo); }; });

  DeltaOpts sdo;
  CLI::App* sdelta = app.add_subcommand("sweep-delta", "stretched hexagons vs the two-block competitor");
  add_common(sdelta, sdo.c);
  add_optimizer(sdelta, sdo.o);
  sdelta->add_option("--n", sdo.n, "N; the competitor has N^2 cells");
  sdelta->add_option("--deltas", sdo.deltas)->delimiter(',');
  sdelta->add_option("--starts", sdo.starts, "perturbed optimizer starts per delta");
  sdelta->add_option("--amplitude", sdo.amplitude);
  sdelta->callback([&] { action = [&] { return run_sweep_delta(sdelta, sdo); }; });

  LambdaOpts slo;
  CLI::App* slambda = app.add_subcommand("sweep-lambda", "penalized minimization over a list of lambda");
  add_common(slambda, slo.c);
  add_model(slambda, slo.m);
  add_optimizer(slambda, slo.o);
  slambda->add_option("--in", slo.in)->required();
  slambda->add_option("--lambdas", slo.lambdas)->delimiter(',');
  slambda->callback([&] { action = [&] { return run_sweep_lambda(slambda, slo); }; });

  SvgOpts so;
  CLI::App* svg = app.add_subcommand("export-svg", "3x3 periodic tiling image");
  add_common(svg, so.c);
  svg->add_option("--in", so.in)->required();
  svg->add_option("--svg", so.svg, "file name inside --out");
  svg->add_option("--width", so.width);
  svg->add_flag("--junctions", so.junctions);
  svg->callback([&] { action = [&] { return run_export_svg(svg, so); }; });

  // a config file alone selects its subcommand
  std::vector<std::string> args(argv, argv + argc);
  const std::optional<std::string> from_config = config_command(args);
  const bool named = std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
    for (const CLI::App* sub : app.get_subcommands({}))
      if (a == sub->get_name()) return true;
    return false;
  });
  if (from_config && !named) args.insert(args.begin() + 1, *from_config);
  args.erase(args.begin());
  std::reverse(args.begin(), args.end());  // CLI11 consumes from the back

  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (app.get_subcommands().size() != 1 || !action ||
      (from_config && *from_config != app.get_subcommands().front()->get_name())) {
    std::cerr << "error: exactly one subcommand is required (config \"command\" must match)\n";
    return 2;
  }

  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::numerical_failure ? 3 : 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
