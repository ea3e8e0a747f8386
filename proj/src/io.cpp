#include "geoflow/io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace geoflow {

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw InputError(what + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw InputError(what + ": unknown key '" + it.key() + "'");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) throw InputError(what + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(what + ": bad value for '" + key + "': " + e.what());
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_header(const DomainGrid& g) { return g.d == 1 ? "k,i0,value\n" : "k,i0,i1,value\n"; }

std::string csv_row(const DomainGrid& g, int k, int x, double v) {
  Offset c = g.coords(x);
  std::string s = std::to_string(k) + "," + std::to_string(c[0]);
  if (g.d == 2) s += "," + std::to_string(c[1]);
  return s + "," + fmt(v) + "\n";
}

}  // namespace

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

json read_json(const std::filesystem::path& p) {
  std::string text = read_text(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json grid_to_json(const DomainGrid& g) {
  return json{{"d", g.d}, {"n", g.n}, {"K", g.K}, {"geometry", to_string(g.geometry)}, {"cap", g.cap}};
}

DomainGrid grid_from_json(const json& j) {
  check_keys(j, {"d", "n", "K", "geometry", "cap"}, "grid");
  DomainGrid g;
  g.d = get<int>(j, "d", "grid");
  g.n = get<int>(j, "n", "grid");
  g.K = get<int>(j, "K", "grid");
  try {
    g.geometry = j.contains("geometry") ? geometry_from_string(get<std::string>(j, "geometry", "grid")) : Geometry::Torus;
    if (j.contains("cap")) g.cap = get<int>(j, "cap", "grid");
    g.validate();
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("grid: ") + e.what());
  }
  return g;
}

json flow_to_json(const PathMeasure& eta) {
  json paths = json::array();
  for (const auto& p : eta.paths) paths.push_back(json{{"label", p.label}, {"nodes", p.nodes}, {"weight", p.weight}});
  return json{{"grid", grid_to_json(eta.grid)}, {"paths", paths}};
}

PathMeasure flow_from_json(const json& j) {
  check_keys(j, {"grid", "paths"}, "flow");
  PathMeasure eta;
  eta.grid = grid_from_json(get<json>(j, "grid", "flow"));
  const json& paths = j.at("paths");
  if (!paths.is_array()) throw InputError("flow: 'paths' must be an array");
  for (size_t i = 0; i < paths.size(); ++i) {
    std::string what = "flow path " + std::to_string(i);
    check_keys(paths[i], {"label", "nodes", "weight"}, what);
    GridPath p;
    p.label = get<int>(paths[i], "label", what);
    p.nodes = get<std::vector<int>>(paths[i], "nodes", what);
    p.weight = get<double>(paths[i], "weight", what);
    if (static_cast<int>(p.nodes.size()) != eta.grid.K + 1)
      throw InputError(what + ": expected " + std::to_string(eta.grid.K + 1) + " nodes");
    eta.paths.push_back(std::move(p));
  }
  return eta;
}

json plan_to_json(const DomainGrid& g, const TransportPlan& p) {
  json rows = json::array();
  for (int a = 0; a < p.m.rows(); ++a) {
    json r = json::array();
    for (int x = 0; x < p.m.cols(); ++x) r.push_back(p.m(a, x));
    rows.push_back(r);
  }
  return json{{"grid", grid_to_json(g)}, {"matrix", rows}};
}

TransportPlan plan_from_json(const json& j, DomainGrid* grid) {
  check_keys(j, {"grid", "matrix"}, "plan");
  DomainGrid g = grid_from_json(get<json>(j, "grid", "plan"));
  auto rows = get<std::vector<std::vector<double>>>(j, "matrix", "plan");
  int N = g.num_cells();
  if (static_cast<int>(rows.size()) != N) throw InputError("plan: expected " + std::to_string(N) + " rows");
  Eigen::MatrixXd m(N, N);
  for (int a = 0; a < N; ++a) {
    if (static_cast<int>(rows[a].size()) != N) throw InputError("plan: row " + std::to_string(a) + " has the wrong length");
    for (int x = 0; x < N; ++x) m(a, x) = rows[a][x];
  }
  TransportPlan p(m);
  int bad = p.first_bad_marginal();
  if (bad >= 0) {
    if (bad < N) throw InputError("plan: row " + std::to_string(bad) + " has a non-uniform marginal or a negative entry");
    throw InputError("plan: column " + std::to_string(bad - N) + " has a non-uniform marginal or a negative entry");
  }
  if (grid) *grid = g;
  return p;
}

std::string pressure_to_csv(const DomainGrid& g, const PressureField& p) {
  std::string s = csv_header(g);
  for (int k = 1; k < g.K; ++k)
    for (int x = 0; x < g.num_cells(); ++x) s += csv_row(g, k, x, p.at(k, x));
  return s;
}

PressureField pressure_from_csv(const DomainGrid& g, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("pressure csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string want = csv_header(g);
  want.pop_back();
  if (line != want) throw InputError("pressure csv: header must be '" + want + "'");
  PressureField p(g.K, g.num_cells());
  Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(p.p.rows(), p.p.cols());
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (static_cast<int>(f.size()) != g.d + 2) throw InputError("pressure csv: line " + std::to_string(row) + " has the wrong column count");
    try {
      int k = std::stoi(f[0]);
      Offset c{std::stoi(f[1]), g.d == 2 ? std::stoi(f[2]) : 0};
      double v = std::stod(f.back());
      if (k < 1 || k >= g.K || c[0] < 0 || c[0] >= g.n || c[1] < 0 || (g.d == 2 && c[1] >= g.n))
        throw InputError("pressure csv: line " + std::to_string(row) + " is out of range");
      int x = g.index(c);
      p.at(k, x) = v;
      seen(k - 1, x) += 1;
    } catch (const InputError&) {
      throw;
    } catch (const std::exception&) {
      throw InputError("pressure csv: cannot parse line " + std::to_string(row));
    }
  }
  if (seen.size() > 0 && (seen.minCoeff() != 1 || seen.maxCoeff() != 1))
    throw InputError("pressure csv: every interior (k, cell) must appear exactly once");
  return p;
}

std::string density_to_csv(const DomainGrid& g, const DensityField& rho) {
  std::string s = csv_header(g);
  for (int k = 0; k <= g.K; ++k)
    for (int x = 0; x < g.num_cells(); ++x) s += csv_row(g, k, x, rho.rho(k, x));
  return s;
}

json euler_to_json(const EulerianFlow& ef) {
  json labels = json::array();
  for (size_t i = 0; i < ef.labels.size(); ++i) {
    json density = json::array(), edges = json::array();
    for (int k = 0; k <= ef.grid.K; ++k)
      for (int x = 0; x < ef.grid.num_cells(); ++x)
        if (ef.c[i](k, x) != 0.0) density.push_back(json::array({k, x, ef.c[i](k, x)}));
    for (int k = 0; k < ef.grid.K; ++k)
      for (const auto& [e, m] : ef.edges[i][k]) edges.push_back(json::array({k, e.first, e.second, m}));
    labels.push_back(json{{"label", ef.labels[i]}, {"density", density}, {"edges", edges}});
  }
  return json{{"grid", grid_to_json(ef.grid)}, {"labels", labels}};
}

EulerianFlow euler_from_json(const json& j) {
  check_keys(j, {"grid", "labels"}, "euler");
  EulerianFlow ef;
  ef.grid = grid_from_json(get<json>(j, "grid", "euler"));
  const auto& g = ef.grid;
  const json& labels = j.at("labels");
  if (!labels.is_array()) throw InputError("euler: 'labels' must be an array");
  int prev = -1;
  for (size_t i = 0; i < labels.size(); ++i) {
    std::string what = "euler label " + std::to_string(i);
    check_keys(labels[i], {"label", "density", "edges"}, what);
    int a = get<int>(labels[i], "label", what);
    if (a <= prev || a >= g.num_cells()) throw InputError(what + ": labels must be increasing cells");
    prev = a;
    ef.labels.push_back(a);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(g.K + 1, g.num_cells());
    std::vector<std::map<std::pair<int, int>, double>> edges(g.K);
    try {
      for (const auto& e : labels[i].at("density")) {
        int k = e.at(0).get<int>(), x = e.at(1).get<int>();
        if (k < 0 || k > g.K || x < 0 || x >= g.num_cells()) throw InputError(what + ": density entry out of range");
        c(k, x) = e.at(2).get<double>();
      }
      for (const auto& e : labels[i].at("edges")) {
        int k = e.at(0).get<int>(), x = e.at(1).get<int>(), y = e.at(2).get<int>();
        if (k < 0 || k >= g.K || x < 0 || x >= g.num_cells() || y < 0 || y >= g.num_cells())
          throw InputError(what + ": edge entry out of range");
        edges[k][{x, y}] = e.at(3).get<double>();
      }
    } catch (const json::exception& e) {
      throw InputError(what + ": " + e.what());
    }
    ef.c.push_back(c);
    ef.edges.push_back(std::move(edges));
  }
  return ef;
}

json maps_to_json(const MPMapFlow& f) {
  return json{{"refine", f.refine}, {"d", f.d},         {"n", f.n},
              {"geometry", to_string(f.geometry)},      {"times", f.times},
              {"maps", f.maps}};
}

MPMapFlow maps_from_json(const json& j) {
  check_keys(j, {"refine", "d", "n", "geometry", "times", "maps"}, "maps");
  MPMapFlow f;
  f.refine = get<int>(j, "refine", "maps");
  f.d = get<int>(j, "d", "maps");
  f.n = get<int>(j, "n", "maps");
  try {
    f.geometry = geometry_from_string(get<std::string>(j, "geometry", "maps"));
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("maps: ") + e.what());
  }
  f.times = get<std::vector<double>>(j, "times", "maps");
  f.maps = get<std::vector<std::vector<int>>>(j, "maps", "maps");
  if (f.times.size() != f.maps.size()) throw InputError("maps: one permutation per time node expected");
  return f;
}

GeodesicProblem problem_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"grid", "eta", "gamma", "backend", "epsilon", "tol", "max_iter", "v_max", "central"}, "problem");
  GeodesicProblem p;
  p.grid = grid_from_json(get<json>(j, "grid", "problem"));
  if (j.contains("v_max")) {
    p.grid.cap = get<int>(j, "v_max", "problem");
    if (p.grid.cap < 0) throw InputError("problem: v_max must be non-negative");
  }
  const int N = p.grid.num_cells();
  auto load = [&](const std::string& key) -> TransportPlan {
    if (!j.contains(key)) throw InputError("problem: missing key '" + key + "'");
    const json& v = j.at(key);
    if (v.is_string()) {
      std::string s = v.get<std::string>();
      if (s == "identity") return identity_plan(N);
      DomainGrid pg;
      TransportPlan t = plan_from_json(read_json(base_dir / s), &pg);
      if (pg.d != p.grid.d || pg.n != p.grid.n) throw InputError("problem: plan " + s + " is on a different grid");
      return t;
    }
    if (v.is_object()) {
      check_keys(v, {"map"}, "problem " + key);
      auto m = get<std::vector<int>>(v, "map", "problem " + key);
      if (static_cast<int>(m.size()) != N) throw InputError("problem: map must have one entry per cell");
      try {
        return plan_of_map(m);
      } catch (const std::exception& e) {
        throw InputError(std::string("problem: ") + e.what());
      }
    }
    throw InputError("problem: '" + key + "' must be \"identity\", a plan file or {\"map\": [...]}");
  };
  p.eta = load("eta");
  p.gamma = load("gamma");
  try {
    if (j.contains("backend")) p.backend = backend_from_string(get<std::string>(j, "backend", "problem"));
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(std::string("problem: ") + e.what());
  }
  if (j.contains("epsilon")) p.epsilon = get<double>(j, "epsilon", "problem");
  if (j.contains("tol")) p.tol = get<double>(j, "tol", "problem");
  if (j.contains("max_iter")) p.max_iter = get<int>(j, "max_iter", "problem");
  if (j.contains("central")) p.central = get<bool>(j, "central", "problem");
  return p;
}

json diagnostics_to_json(const GeodesicSolution& s) {
  const auto& d = s.diag;
  return json{{"value", s.value},
              {"gap", d.gap},
              {"iterations", d.iterations},
              {"backend", d.backend},
              {"primal_value", d.primal_value},
              {"dual_value", d.dual_value},
              {"marginal_error", d.marginal_error},
              {"dual_infeasibility", d.dual_infeasibility},
              {"complementary_slackness", d.complementary_slackness},
              {"num_paths", d.num_paths},
              {"num_rows", d.num_rows},
              {"converged", d.converged},
              {"short_circuit", d.short_circuit}};
}

}  // namespace geoflow
