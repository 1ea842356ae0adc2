#include "perpart/constructions.hpp"
#include "perpart/io.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace perpart;

namespace {

std::string to_text(const State& s, std::optional<double> energy = {}) {
  std::ostringstream os;
  write_state(os, s, energy);
  return os.str();
}

StateFile from_text(const std::string& text) {
  std::istringstream is(text);
  return read_state(is);
}

int count_of(const std::string& text, const std::string& what) {
  int n = 0;
  for (std::size_t at = text.find(what); at != std::string::npos; at = text.find(what, at + 1)) ++n;
  return n;
}

void expect_same(const PolyPartition& a, const PolyPartition& b) {
  EXPECT_EQ(a.lattice, b.lattice);
  ASSERT_EQ(a.dof_count(), b.dof_count());
  EXPECT_TRUE((a.positions().array() == b.positions().array()).all());
  ASSERT_EQ(a.edges.size(), b.edges.size());
  for (std::size_t e = 0; e < a.edges.size(); ++e) {
    EXPECT_EQ(a.edges[e].tail, b.edges[e].tail);
    EXPECT_EQ(a.edges[e].head, b.edges[e].head);
    EXPECT_EQ(a.edges[e].wrap, b.edges[e].wrap);
  }
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    EXPECT_EQ(a.cells[c].label, b.cells[c].label);
    EXPECT_EQ(a.cells[c].target, b.cells[c].target);
    EXPECT_EQ(a.cells[c].shift, b.cells[c].shift);
    EXPECT_EQ(a.cells[c].loop, b.cells[c].loop);
  }
}

}  // namespace

TEST(StateFile, PartitionRoundTripIsBitExact) {
  std::vector<PolyPartition> states{honeycomb(4), perturb(stretched_hex_domain({1.3, 0.7, 1.1, 0.9}), 0.04, 8),
                                    slab_partition(Lattice::planar({1.1, 0.2}, {0.3, 0.9}), {0.25, 0.46, 0.22})};
  const std::vector<double> v{1.05, 0.95, 1.03, 0.97};
  states.push_back(minimize_poly(perturb(honeycomb(4), 0.05, 2), EnergyModel::classical(v), OptimizerConfig{}).state);
  for (const PolyPartition& p : states) {
    const EnergyModel m = EnergyModel::classical(p.targets());
    const std::string text = to_text(p);
    const StateFile f = from_text(text);
    const auto& q = std::get<PolyPartition>(f.state);
    expect_same(p, q);
    EXPECT_EQ(evaluate(p, m).total, evaluate(q, m).total);
    EXPECT_EQ(to_text(q), text);
    EXPECT_FALSE(f.energy.has_value());
  }
}

TEST(StateFile, EnergyField) {
  const PolyPartition hc = honeycomb(4);
  const double e = evaluate(hc, EnergyModel::classical({1, 1, 1, 1})).total;
  const std::string text = to_text(hc, e);
  EXPECT_NE(text.find("energy 7.44483"), std::string::npos);
  const StateFile f = from_text(text);
  ASSERT_TRUE(f.energy.has_value());
  EXPECT_EQ(*f.energy, e);
  EXPECT_EQ(std::get<PolyPartition>(f.state).num_cells(), 4);
}

TEST(StateFile, GridRoundTrip) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> lab(1, 3);
  GridPartition g = GridPartition::filled(Lattice::planar({1.0, 0.1}, {0.35, 0.8}), 9, 3);
  for (int& l : g.labels) l = lab(rng);
  const std::string text = to_text(g, 1.25);
  const StateFile f = from_text(text);
  const auto& h = std::get<GridPartition>(f.state);
  EXPECT_EQ(h.lattice, g.lattice);
  EXPECT_EQ(h.n, g.n);
  EXPECT_EQ(h.num_labels, g.num_labels);
  EXPECT_EQ(h.labels, g.labels);
  EXPECT_EQ(*f.energy, 1.25);
  EXPECT_EQ(to_text(h, 1.25), text);
}

TEST(StateFile, FileRoundTrip) {
  const std::string path = ::testing::TempDir() + "/perpart_io_roundtrip.txt";
  const PolyPartition p = perturb(honeycomb(2), 0.03, 1);
  save_state(path, p);
  expect_same(p, std::get<PolyPartition>(load_state(path).state));
  EXPECT_THROW(load_state(path + ".missing"), Error);
}

TEST(StateFile, RejectsMalformedInput) {
  const std::string good = to_text(honeycomb(2));
  auto kind_of = [](const std::string& text) {
    try {
      from_text(text);
    } catch (const Error& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  const int invalid = static_cast<int>(ErrorKind::invalid_input);
  EXPECT_EQ(kind_of(""), invalid);
  EXPECT_EQ(kind_of("periodic-foam v1\n"), invalid);
  EXPECT_EQ(kind_of("periodic-partition v2\n"), invalid);
  EXPECT_EQ(kind_of(good.substr(0, good.size() / 2)), invalid);
  EXPECT_EQ(kind_of(good + "extra\n"), invalid);
  std::string bad_ref = good;
  bad_ref.replace(bad_ref.rfind(' '), std::string::npos, " 99\n");
  EXPECT_EQ(kind_of(bad_ref), invalid);
  std::string bad_num = good;
  bad_num.replace(bad_num.find("lattice ") + 8, 1, "x");
  EXPECT_EQ(kind_of(bad_num), invalid);
  EXPECT_EQ(kind_of("periodic-grid v1\nlattice 1 0 0 1\nsize 2 2\n1 2\n2 3\n"), invalid);
  EXPECT_EQ(kind_of("periodic-grid v1\nlattice 1 0 0 1\nsize 2 2\n1 2\n2\n"), invalid);
  EXPECT_NO_THROW(from_text("periodic-grid v1\nlattice 1 0 0 1\nsize 2 2\n1 2\n2 1\n"));
}

TEST(Csv, TraceHasHeaderAndFullPrecision) {
  const std::vector<double> v{1.05, 0.95, 1.03, 0.97};
  const PolyRun r = minimize_poly(perturb(honeycomb(4), 0.05, 1), EnergyModel::classical(v), OptimizerConfig{});
  std::ostringstream os;
  write_trace_csv(os, r.trace);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "iter,energy,volume_residual,grad_norm,step,event");
  EXPECT_EQ(count_of(text, "\n"), static_cast<int>(r.trace.rows.size()) + 1);
  // energy column parses back exactly
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  for (const TraceRow& row : r.trace.rows) {
    std::getline(is, line);
    const auto a = line.find(','), b = line.find(',', a + 1);
    EXPECT_EQ(std::strtod(line.substr(a + 1, b - a - 1).c_str(), nullptr), row.energy);
  }
}

TEST(Csv, BreakdownRowsAndTotals) {
  const PolyPartition p = stretched_hex_domain({1.2, 0.8});
  const EnergyBreakdown b = evaluate(p, EnergyModel::classical({1.2, 0.8}));
  std::ostringstream os;
  write_breakdown_csv(os, b, {1, 2});
  const std::string text = os.str();
  EXPECT_EQ(count_of(text, "\n"), 4);
  EXPECT_NE(text.find("\ntotal,"), std::string::npos);
  EXPECT_NE(text.find("," + fmt(b.total) + "\n"), std::string::npos);
}

TEST(Csv, QuotesEvents) {
  EXPECT_EQ(csv_quote("surgery"), "surgery");
  EXPECT_EQ(csv_quote("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_quote("say \"x\""), "\"say \"\"x\"\"\"");
}

TEST(Csv, DiagnosticsTables) {
  const PolyPartition hc = honeycomb(2);
  const DiagnosticsReport r = diagnose(hc, EnergyModel::classical({1, 1}), {10, 1});
  std::ostringstream arcs, junctions, text;
  write_arcs_csv(arcs, r.arcs);
  write_junctions_csv(junctions, r.junctions);
  write_report_text(text, r);
  EXPECT_EQ(count_of(arcs.str(), "\n"), static_cast<int>(hc.edges.size()) + 1);
  EXPECT_EQ(count_of(junctions.str(), "\n"), 5);
  EXPECT_NE(text.str().find("probe passed"), std::string::npos);
  EXPECT_NE(text.str().find("irregular_vertices 0"), std::string::npos);
}

TEST(Svg, PartitionTiling) {
  const PolyPartition hc = honeycomb(4);
  std::ostringstream a, b;
  write_svg(a, hc);
  write_svg(b, hc);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().rfind("<svg", 0), 0u);
  EXPECT_EQ(count_of(a.str(), "<polygon"), 9 * 4);
  std::ostringstream c;
  write_svg(c, hc, {600.0, true});
  EXPECT_EQ(count_of(c.str(), "<circle"), static_cast<int>(hc.vertices.size()));
}

TEST(Svg, GridRaster) {
  GridPartition g = GridPartition::filled(Lattice::square(), 6, 2, 1);
  g.at(2, 3) = 2;
  std::ostringstream os;
  write_svg(os, State{g});
  EXPECT_EQ(count_of(os.str(), "<polygon"), 9 * 36);
  EXPECT_NE(os.str().find("</svg>"), std::string::npos);
}
