#include "geoflow/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "geoflow/approx.hpp"
#include "geoflow/certificates.hpp"
#include "geoflow/costs.hpp"
#include "geoflow/eulerian.hpp"
#include "geoflow/instances.hpp"
#include "geoflow/io.hpp"
#include "geoflow/parallel.hpp"
#include "geoflow/solver.hpp"

namespace geoflow {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Everything a run reads and writes, recorded in manifest.json.
struct Run {
  std::string command;
  std::vector<std::string> args;
  fs::path out_dir;
  bool has_out = false;
  json inputs = json::object();
  json outputs = json::object();
  std::optional<std::uint64_t> seed;

  void set_out_dir(const fs::path& p) {
    out_dir = p.empty() ? fs::path(".") : p;
    has_out = true;
  }
  std::string input(const fs::path& p) {
    std::string text = read_text(p);
    inputs[p.generic_string()] = fnv1a_hex(text);
    return text;
  }
  json input_json(const fs::path& p) {
    std::string text = input(p);
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw InputError(p.string() + ": " + e.what());
    }
  }
  void output(const fs::path& p, const std::string& text) {
    write_text(p, text);
    outputs[p.generic_string()] = fnv1a_hex(text);
  }
  void output_json(const fs::path& p, const json& j) { output(p, j.dump(2) + "\n"); }

  void write_manifest(int code, const std::string& error) const {
    if (!has_out) return;
    json m{{"tool", "geoflow"}, {"version", kVersion}, {"command", command}, {"arguments", args}};
    m["seed"] = seed ? json(*seed) : json(nullptr);
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["exit_code"] = code;
    if (!error.empty()) m["error"] = error;
    try {
      write_json(out_dir / "manifest.json", m);
    } catch (const std::exception& e) {
      std::cerr << "geoflow: cannot write manifest: " << e.what() << "\n";
    }
  }
};

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError(what + ": cannot parse '" + item + "'");
    }
  }
  return out;
}

std::vector<std::pair<int, double>> parse_schedule(const std::string& s) {
  std::vector<std::pair<int, double>> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto c = item.find(':');
    if (c == std::string::npos) throw InputError("schedule entries are N:eps, got '" + item + "'");
    try {
      out.push_back({std::stoi(item.substr(0, c)), std::stod(item.substr(c + 1))});
    } catch (const std::exception&) {
      throw InputError("schedule: cannot parse '" + item + "'");
    }
  }
  return out;
}

// grid from a grid file, or from any file with a "grid" member
DomainGrid grid_of(const json& j) {
  if (j.is_object() && j.contains("grid")) return grid_from_json(j.at("grid"));
  return grid_from_json(j);
}

PathMeasure load_flow(Run& run, const fs::path& p) {
  PathMeasure eta = flow_from_json(run.input_json(p));
  try {
    eta.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(p.string() + ": " + e.what());
  }
  return eta;
}

std::string cost_csv(const DomainGrid& g, const CostMatrix& c) {
  std::string s = "x,y,cost\n";
  for (int x = 0; x < c.size(); ++x)
    for (int y = 0; y < c.size(); ++y)
      s += std::to_string(x) + "," + std::to_string(y) + "," +
           (c.is_finite(x, y) ? fmt(c.c(x, y)) : std::string("inf")) + "\n";
  (void)g;
  return s;
}

std::string kbound_csv(const DomainGrid& g, const std::vector<double>& kb) {
  std::string s = g.d == 1 ? "i0,k_bound\n" : "i0,i1,k_bound\n";
  for (int x = 0; x < g.num_cells(); ++x) {
    auto c = g.coords(x);
    s += std::to_string(c[0]) + ",";
    if (g.d == 2) s += std::to_string(c[1]) + ",";
    s += fmt(kb[x]) + "\n";
  }
  return s;
}

json report_json(const CertificateReport& r) {
  return json{{"verdict", r.verdict ? "certified" : "rejected"},
              {"reason", r.reason},
              {"tolerance", r.tolerance},
              {"first_condition",
               {{"max_gap", r.first.max_gap},
                {"worst_path", r.first.worst_path},
                {"worst_interval", {r.first.worst_s, r.first.worst_t}},
                {"weighted_gap", r.first.weighted_gap}}},
              {"second_condition",
               {{"max_gap", r.second.max_gap},
                {"worst_label", r.second.worst_label},
                {"worst_interval", {r.second.worst_s, r.second.worst_t}},
                {"intervals_checked", r.second.intervals_checked},
                {"weighted_gap", r.second.weighted_gap}}},
              {"identity_residual", r.identity_residual}};
}

json approx_json(const ApproxReport& r, const ApproxOptions& o) {
  return json{{"N", o.N},
              {"eps", o.eps},
              {"alpha", o.alpha},
              {"seed", o.seed},
              {"seed_used", r.seed_used},
              {"attempts", r.attempts},
              {"short_circuit", r.short_circuit},
              {"target_action", r.target_action},
              {"action", r.action},
              {"action_error", r.action_error},
              {"endpoint_w2", r.endpoint_w2},
              {"shrunk_action", r.shrunk_action},
              {"sample_action", r.sample_action},
              {"rho_sup_error", r.rho_sup_error},
              {"correction_residual", r.correction_residual},
              {"added_action", r.added_action},
              {"bijections", r.flow.all_bijections()},
              {"density_residual", r.flow.density_residual()}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Generalized incompressible flows on a space-time grid"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: GEOFLOW_THREADS or 1)");

  // solve
  std::string problem_path, out_dir = "out";
  bool central = false;
  auto* solve_cmd = app.add_subcommand("solve", "solve a geodesic problem file");
  solve_cmd->add_option("problem", problem_path, "problem.json")->required();
  solve_cmd->add_option("-o,--out", out_dir, "output directory");
  solve_cmd->add_flag("--central", central, "exact backend: central point of the optimal face");

  // verify
  std::string flow_path, pressure_path, intervals = "all", report_path = "report.json";
  double tol = 1e-7;
  auto* verify_cmd = app.add_subcommand("verify", "certify a flow with a pressure");
  verify_cmd->add_option("flow", flow_path, "flow.json")->required();
  verify_cmd->add_option("pressure", pressure_path, "pressure.csv")->required();
  verify_cmd->add_option("--tol", tol);
  verify_cmd->add_option("--intervals", intervals, "all | sample:m");
  verify_cmd->add_option("-o,--out", report_path, "report file");

  // cost
  std::string q_path, grid_path, cost_out = "cost.csv";
  std::vector<int> interval;
  bool want_k = false;
  auto* cost_cmd = app.add_subcommand("cost", "cost matrix c^{s,t}_q");
  cost_cmd->add_option("--q", q_path, "pressure.csv")->required();
  cost_cmd->add_option("--grid", grid_path, "grid, flow or problem JSON holding the grid")->required();
  cost_cmd->add_option("--interval", interval, "s t")->expected(2)->required();
  cost_cmd->add_option("--out", cost_out);
  cost_cmd->add_flag("--k-bound", want_k, "also write the K bound per cell");

  // euler
  std::string euler_in, euler_out;
  auto* euler_cmd = app.add_subcommand("euler", "convert between path and Eulerian form");
  euler_cmd->require_subcommand(1);
  auto* euler_from = euler_cmd->add_subcommand("from", "flow.json -> euler.json");
  euler_from->add_option("input", euler_in)->required();
  euler_from->add_option("-o,--out", euler_out)->required();
  auto* euler_to = euler_cmd->add_subcommand("to", "euler.json -> flow.json");
  euler_to->add_option("input", euler_in)->required();
  euler_to->add_option("-o,--out", euler_out)->required();

  // approx
  ApproxOptions ao;
  std::string maps_out = "maps.json";
  auto* approx_cmd = app.add_subcommand("approx", "approximate a flow by permutation flows");
  approx_cmd->add_option("flow", flow_path, "flow.json")->required();
  approx_cmd->add_option("-N", ao.N);
  approx_cmd->add_option("--eps", ao.eps);
  approx_cmd->add_option("--alpha", ao.alpha);
  approx_cmd->add_option("--seed", ao.seed);
  approx_cmd->add_option("--refine", ao.refine);
  approx_cmd->add_option("--tol-rho", ao.tol_rho);
  approx_cmd->add_option("-o,--out", maps_out);

  // bench
  std::string table_out, sweep = "0.1,0.01,0.001", sizes = "4,8", schedule = "100:0.1,1000:0.05,10000:0.025";
  std::string bench_problem;
  int bench_K = 2;
  auto* bench_cmd = app.add_subcommand("bench", "CSV tables for the acceptance studies");
  bench_cmd->require_subcommand(1);
  auto* bench_ent = bench_cmd->add_subcommand("entropic", "entropic value vs epsilon");
  bench_ent->add_option("--eps", sweep, "comma separated epsilons (empty: header only)");
  bench_ent->add_option("--problem", bench_problem, "problem file (default: reflection, T^1, n=4, K=2)");
  bench_ent->add_option("-o,--out", table_out)->required();
  auto* bench_ref = bench_cmd->add_subcommand("refine", "reflection value vs n");
  bench_ref->add_option("--n", sizes, "comma separated grid sizes");
  bench_ref->add_option("--K", bench_K);
  bench_ref->add_option("-o,--out", table_out)->required();
  auto* bench_app = bench_cmd->add_subcommand("approx", "approximation schedule");
  bench_app->add_option("--flow", flow_path, "flow.json (default: half swap, [0,1]^2, n=8)");
  bench_app->add_option("--schedule", schedule, "N:eps,...");
  bench_app->add_option("--alpha", ao.alpha);
  bench_app->add_option("--seed", ao.seed);
  bench_app->add_option("--refine", ao.refine);
  bench_app->add_option("-o,--out", table_out)->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "geoflow: " << e.what() << "\n";
    return kBadInput;
  }

  if (threads > 0) set_thread_count(threads);

  Run run;
  run.args = args;
  int code = kOk;
  std::string error;
  try {
    if (*solve_cmd) {
      run.command = "solve";
      run.set_out_dir(out_dir);
      fs::path pp(problem_path);
      GeodesicProblem prob = problem_from_json(run.input_json(pp), pp.parent_path());
      if (central) prob.central = true;
      prob.validate();
      GeodesicSolution sol = solve(prob);
      fs::path od(run.out_dir);
      run.output_json(od / "flow.json", flow_to_json(sol.flow));
      run.output(od / "pressure.csv", pressure_to_csv(sol.flow.grid, sol.pressure));
      run.output(od / "density.csv", density_to_csv(sol.flow.grid, density_of(sol.flow)));
      run.output_json(od / "diagnostics.json", diagnostics_to_json(sol));
      std::cout << "value " << fmt(sol.value) << "\n";
    } else if (*verify_cmd) {
      run.command = "verify";
      fs::path rp(report_path);
      run.set_out_dir(rp.parent_path());
      PathMeasure eta = load_flow(run, flow_path);
      PressureField q = pressure_from_csv(eta.grid, run.input(pressure_path));
      std::vector<std::pair<int, int>> iv;
      if (intervals == "all") {
        iv = default_intervals(eta.grid);
      } else if (intervals.rfind("sample:", 0) == 0) {
        int m = 0;
        try {
          m = std::stoi(intervals.substr(7));
        } catch (const std::exception&) {
          throw InputError("--intervals: cannot parse '" + intervals + "'");
        }
        if (m < 1) throw InputError("--intervals: sample size must be positive");
        iv = sample_intervals(eta.grid, m);
      } else {
        throw InputError("--intervals must be 'all' or 'sample:m'");
      }
      CertificateReport r = certify(eta, q, tol, &iv);
      run.output_json(rp, report_json(r));
      std::cout << (r.verdict ? "certified" : "rejected: " + r.reason) << "\n";
      if (!r.verdict) code = kRejected;
    } else if (*cost_cmd) {
      run.command = "cost";
      fs::path op(cost_out);
      run.set_out_dir(op.parent_path());
      DomainGrid g = grid_of(run.input_json(grid_path));
      PressureField q = pressure_from_csv(g, run.input(q_path));
      int s = interval[0], t = interval[1];
      if (s < 0 || t > g.K || s >= t) throw InputError("--interval needs 0 <= s < t <= K");
      CostMatrix c = dp_cost(g, q, s, t);
      run.output(op, cost_csv(g, c));
      if (want_k) {
        fs::path kp = op.parent_path() / (op.stem().string() + "_kbound.csv");
        run.output(kp, kbound_csv(g, k_bound(g, q, s, t)));
      }
    } else if (*euler_cmd) {
      fs::path op(euler_out);
      run.set_out_dir(op.parent_path());
      if (*euler_from) {
        run.command = "euler from";
        PathMeasure eta = load_flow(run, euler_in);
        run.output_json(op, euler_to_json(from_path_measure(eta)));
      } else {
        run.command = "euler to";
        EulerianFlow ef = euler_from_json(run.input_json(euler_in));
        try {
          ef.validate();
        } catch (const std::invalid_argument& e) {
          throw InputError(euler_in + ": " + e.what());
        }
        run.output_json(op, flow_to_json(to_path_measure(ef)));
      }
    } else if (*approx_cmd) {
      run.command = "approx";
      run.seed = ao.seed;
      fs::path op(maps_out);
      run.set_out_dir(op.parent_path());
      PathMeasure eta = load_flow(run, flow_path);
      ApproxReport r = approximate(eta, ao);
      run.output_json(op, maps_to_json(r.flow));
      fs::path dir = op.parent_path();
      run.output(dir / "convergence.csv", "N,action_error,endpoint_W2\n" + std::to_string(ao.N) + "," +
                                              fmt(r.action_error) + "," + fmt(r.endpoint_w2) + "\n");
      run.output_json(dir / "approx_report.json", approx_json(r, ao));
      std::cout << "action_error " << fmt(r.action_error) << " endpoint_W2 " << fmt(r.endpoint_w2) << "\n";
    } else if (*bench_cmd) {
      fs::path op(table_out);
      run.set_out_dir(op.parent_path());
      if (*bench_ent) {
        run.command = "bench entropic";
        std::vector<double> eps = parse_doubles(sweep, "--eps");
        GeodesicProblem prob = reflection_problem(DomainGrid(1, 4, 2));
        if (!bench_problem.empty()) {
          fs::path pp(bench_problem);
          prob = problem_from_json(run.input_json(pp), pp.parent_path());
        }
        std::string table = "epsilon,value,exact_value,relative_gap,marginal_error,iterations\n";
        if (!eps.empty()) {
          GeodesicProblem ex = prob;
          ex.backend = Backend::Exact;
          double exact = solve(ex).value;
          for (double e : eps) {
            GeodesicProblem en = prob;
            en.backend = Backend::Entropic;
            en.epsilon = e;
            GeodesicSolution s = solve(en);
            double rel = exact != 0.0 ? (s.value - exact) / exact : s.value;
            table += fmt(e) + "," + fmt(s.value) + "," + fmt(exact) + "," + fmt(rel) + "," +
                     fmt(s.diag.marginal_error) + "," + std::to_string(s.diag.iterations) + "\n";
          }
        }
        run.output(op, table);
      } else if (*bench_ref) {
        run.command = "bench refine";
        std::string table = "n,K,value\n";
        for (double nd : parse_doubles(sizes, "--n")) {
          int n = static_cast<int>(nd);
          if (n != nd || n < 2) throw InputError("--n entries must be integers >= 2");
          GeodesicSolution s = solve(reflection_problem(DomainGrid(1, n, bench_K)));
          table += std::to_string(n) + "," + std::to_string(bench_K) + "," + fmt(s.value) + "\n";
        }
        run.output(op, table);
      } else {
        run.command = "bench approx";
        run.seed = ao.seed;
        PathMeasure eta = flow_path.empty() ? half_swap_flow(2, 8) : load_flow(run, flow_path);
        std::string table = "N,eps,action_error,endpoint_W2,action,attempts,seed_used\n";
        for (auto [N, e] : parse_schedule(schedule)) {
          ApproxOptions o = ao;
          o.N = N;
          o.eps = e;
          ApproxReport r = approximate(eta, o);
          table += std::to_string(N) + "," + fmt(e) + "," + fmt(r.action_error) + "," + fmt(r.endpoint_w2) + "," +
                   fmt(r.action) + "," + std::to_string(r.attempts) + "," + std::to_string(r.seed_used) + "\n";
        }
        run.output(op, table);
      }
    }
  } catch (const std::invalid_argument& e) {
    code = kBadInput;
    error = e.what();
  } catch (const std::exception& e) {
    code = kFailure;
    error = e.what();
  }
  if (!error.empty()) std::cerr << "geoflow: " << error << "\n";
  run.write_manifest(code, error);
  return code;
}

}  // namespace geoflow
