#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "oscsim/experiments.hpp"

using namespace osc;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return json::parse(in, nullptr, true, true);
}

struct DeviceOptions {
  std::string table = "table2";
  std::string params_file;
  std::vector<std::string> set;
  std::string geometry = "rods";
  std::string geometry_file;
  std::string mesh_file;
  std::string model;
  bool micro = false;
  bool no_periodic = false;

  void add(CLI::App* app) {
    app->add_option("--table", table, "base parameter set")->check(CLI::IsMember({"table1", "table2"}));
    app->add_option("--params", params_file, "JSON object of parameter overrides")->check(CLI::ExistingFile);
    app->add_option("--set", set, "parameter override key=value (repeatable)");
    app->add_option("--geometry", geometry, "generated geometry")
        ->check(CLI::IsMember({"rods", "biplanar", "morphology", "line"}));
    app->add_option("--geometry-file", geometry_file, "JSON geometry overrides")->check(CLI::ExistingFile);
    app->add_option("--mesh", mesh_file, "mesh file, overrides --geometry")->check(CLI::ExistingFile);
    app->add_option("--model", model, "k_diss model: A, B, C or constant");
    app->add_flag("--micro", micro, "1D microscale model with an explicit slab of half width H");
    app->add_flag("--no-periodic", no_periodic, "natural instead of periodic lateral boundaries");
  }

  DeviceParams params(double V) const {
    DeviceParams p = table == "table1" ? table1_params(V) : table2_params(V);
    json over = params_file.empty() ? json::object() : read_json(params_file);
    for (const auto& kv : set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
      const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      try {
        std::size_t used = 0;
        const double d = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
        over[key] = d;
      } catch (const std::invalid_argument&) {
        over[key] = val;
      }
    }
    p = params_from_json(over, p);
    if (!model.empty()) p.kdiss_model = parse_kdiss_model(model);
    p.V_appl = V;
    p.validate();
    return p;
  }

  Mesh mesh(const DeviceParams& p) const {
    if (!mesh_file.empty()) {
      std::ifstream in(mesh_file);
      return load_triangle_mesh(in);
    }
    const json g = geometry_file.empty() ? json::object() : read_json(geometry_file);
    if (geometry == "line") {
      LineDevice d;
      d.length = g.value("length", d.length);
      d.interface_position = g.value("interface_position", d.interface_position);
      d.n_elements = g.value("n_elements", d.n_elements);
      d.min_elements_per_subslab = g.value("min_elements_per_subslab", d.min_elements_per_subslab);
      return micro ? build_line_device(d, p.H) : build_line_mesh(d.length, d.n_elements, d.interface_position);
    }
    if (geometry == "morphology") return build_morphology_mesh(morphology_from_json(g));
    RodGeometry base;
    if (geometry == "biplanar") base.n_rods = 0;
    return build_rod_mesh(rod_geometry_from_json(g, base));
  }

  std::unique_ptr<DeviceProblem> problem(const DeviceParams& p) const {
    Mesh m = mesh(p);
    if (micro) return std::make_unique<MicroModel>(std::move(m), p);
    const bool periodic = m.dimension() == 2 && !no_periodic;
    return std::make_unique<MacroModel>(std::move(m), p, periodic);
  }
};

void print_mesh_summary(const Mesh& m) {
  std::cout << "dimension " << m.dimension() << "\nnodes " << m.num_nodes() << "\nelements " << m.num_elements()
            << "\nnegative_edge_weights " << count_negative_edge_weights(m) << '\n';
  std::cout.precision(10);
  std::cout << "interface_length " << interface_length(extract_interface(m)) << '\n';
}

void write_curve(std::ostream& out, const JVCurve& c) {
  out << "# V [V], j [A/m^2] signed (positive at short circuit), j_tot = |j|; model " << c.kdiss_model << '\n';
  out << "V,j,j_tot,converged,iterations,residual\n";
  out.precision(17);
  for (const auto& p : c.points)
    out << p.V << ',' << p.j << ',' << p.j_tot << ',' << p.converged << ',' << p.iterations << ',' << p.residual_norm
        << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-scale organic solar cell simulator"};
  app.set_version_flag("--version", code_version());
  app.require_subcommand(1);

  auto* mesh_cmd = app.add_subcommand("mesh", "generate or validate a mesh");
  DeviceOptions mesh_dev;
  mesh_dev.add(mesh_cmd);
  std::string mesh_out;
  mesh_cmd->add_option("-o,--out", mesh_out, "write the mesh to this file");

  auto* solve_cmd = app.add_subcommand("solve", "stationary solve at one bias");
  DeviceOptions solve_dev;
  solve_dev.add(solve_cmd);
  double solve_V = 0.0;
  std::string fields_out;
  double transient_end = 0.0;
  solve_cmd->add_option("-V,--bias", solve_V, "applied voltage [V]");
  solve_cmd->add_option("--fields", fields_out, "write the node table to this CSV");
  solve_cmd->add_option("--transient", transient_end, "march the turn-on transient to this time [s] instead");

  auto* sweep_cmd = app.add_subcommand("sweep", "J-V characteristic");
  DeviceOptions sweep_dev;
  sweep_dev.add(sweep_cmd);
  double v0 = 0.0, v1 = 1.0, dv = 0.05, fine = 0.005;
  std::string sweep_out;
  sweep_cmd->add_option("--begin", v0, "first bias [V]");
  sweep_cmd->add_option("--end", v1, "last bias [V]");
  sweep_cmd->add_option("--step", dv, "bias step [V]");
  sweep_cmd->add_option("--fine-step", fine, "bias step within 50 mV of 0.6 V");
  sweep_cmd->add_option("-o,--out", sweep_out, "CSV output (stdout when omitted)");

  auto* exp_cmd = app.add_subcommand("experiment", "run a JSON-configured experiment or replay a manifest");
  std::string exp_config, exp_dir;
  exp_cmd->add_option("config", exp_config, "experiment config or manifest.json")->required()->check(CLI::ExistingFile);
  exp_cmd->add_option("outdir", exp_dir, "output directory")->required();

  auto* kd_cmd = app.add_subcommand("kdiss", "tabulate the dissociation-rate models");
  std::string kd_table = "table2", kd_out;
  double e_min = 1e5, e_max = 1e8;
  int e_points = 31;
  std::vector<double> chi_deg{0, 15, 30, 45, 60, 75, 90};
  kd_cmd->add_option("--table", kd_table)->check(CLI::IsMember({"table1", "table2"}));
  kd_cmd->add_option("--e-min", e_min, "smallest field [V/m]");
  kd_cmd->add_option("--e-max", e_max, "largest field [V/m]");
  kd_cmd->add_option("--points", e_points, "log-spaced field values")->check(CLI::Range(2, 100000));
  kd_cmd->add_option("--chi", chi_deg, "inclinations from the interface normal [deg]");
  kd_cmd->add_option("-o,--out", kd_out, "CSV output (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mesh_cmd) {
      const Mesh m = mesh_dev.mesh(mesh_dev.params(0.0));
      print_mesh_summary(m);
      if (!mesh_out.empty()) {
        std::ofstream out(mesh_out);
        write_mesh(out, m);
        if (!out) throw std::runtime_error("cannot write " + mesh_out);
      }
    } else if (*solve_cmd) {
      const auto p = solve_dev.params(solve_V);
      auto pr = solve_dev.problem(p);
      Vector y = pr->initial_state();
      std::cout.precision(10);
      if (transient_end > 0) {
        MarchOptions o;
        o.t_end = transient_end;
        o.dt0 = 1e-13;
        const auto tr = run_transient(*pr, y, o);
        std::cout << "# t [s], j_tot [A/m^2]\nt,j_tot\n";
        for (std::size_t i = 0; i < tr.t.size(); ++i) std::cout << tr.t[i] << ',' << tr.j_tot[i] << '\n';
        y = tr.result.y;
      } else {
        const auto rep = steady_solve(*pr, y);
        std::cout << "iterations " << rep.iterations << "\nj " << signed_current(*pr, y) << " A/m^2\nbalance "
                  << contact_balance(*pr, y) << '\n';
      }
      if (!fields_out.empty()) export_fields(*pr, y, fields_out);
    } else if (*sweep_cmd) {
      const auto p = sweep_dev.params(v0);
      auto pr = sweep_dev.problem(p);
      Vector y = pr->initial_state();
      const auto curve = jv_sweep(*pr, bias_grid(v0, v1, dv, 0.6, fine), y);
      if (sweep_out.empty()) {
        write_curve(std::cout, curve);
      } else {
        std::ofstream out(sweep_out);
        write_curve(out, curve);
        if (!out) throw std::runtime_error("cannot write " + sweep_out);
      }
      try {
        const auto vj = extract_voc_jsc(curve);
        std::cerr << "Voc " << vj.voc << " V, Jsc " << vj.jsc << " A/m^2\n";
      } catch (const VocUndefined& e) {
        std::cerr << "Voc undefined: " << e.what() << '\n';
      }
    } else if (*exp_cmd) {
      const auto manifest = run_experiment(read_json(exp_config), exp_dir);
      std::cout << "wrote " << exp_dir << " (" << manifest.at("kind").get<std::string>() << ")\n";
    } else if (*kd_cmd) {
      const DeviceParams p = kd_table == "table1" ? table1_params() : table2_params();
      std::vector<double> E, chi;
      for (int i = 0; i < e_points; ++i)
        E.push_back(e_min * std::pow(e_max / e_min, static_cast<double>(i) / (e_points - 1)));
      for (double c : chi_deg) chi.push_back(c * std::numbers::pi / 180);
      const auto rows = kdiss_table(p, E, chi);
      std::ofstream file;
      if (!kd_out.empty()) file.open(kd_out);
      std::ostream& out = kd_out.empty() ? std::cout : file;
      out << "# E [V/m], chi [deg] from the interface normal, k_diss / k_diss0 [-]\nE,chi_deg,A,B,C\n";
      out.precision(17);
      for (const auto& r : rows) out << r.E << ',' << r.chi * 180 / std::numbers::pi << ',' << r.A << ',' << r.B << ',' << r.C << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
