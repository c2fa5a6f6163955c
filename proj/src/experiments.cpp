#include "oscsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#ifndef OSCSIM_VERSION
#define OSCSIM_VERSION "unknown"
#endif

namespace osc {

using nlohmann::json;

std::string code_version() { return OSCSIM_VERSION; }

DeviceParams with_model(DeviceParams p, KdissModel m) {
  p.kdiss_model = m;
  return p;
}

Mesh build_line_device(const LineDevice& d, double H) {
  return build_line_mesh(d.length, d.n_elements, d.interface_position, H, d.min_elements_per_subslab);
}

std::vector<MicroMacroRow> micro_macro_1d(const DeviceParams& params, const LineDevice& device,
                                          const std::vector<double>& H_values) {
  std::vector<MicroMacroRow> rows;
  for (double H : H_values) {
    DeviceParams p = params;
    p.H = H;
    const Mesh mesh = build_line_device(device, H);
    MicroModel micro(mesh, p);
    MacroModel macro(mesh, p, false);
    Vector ym = micro.initial_state(), yM = macro.initial_state();
    steady_solve(micro, ym);
    steady_solve(macro, yM);
    MicroMacroRow r;
    r.H = H;
    r.j_micro = total_current(micro, ym);
    r.j_macro = total_current(macro, yM);
    r.rel = std::abs(r.j_macro - r.j_micro) / r.j_micro;
    r.balance_micro = contact_balance(micro, ym);
    r.balance_macro = contact_balance(macro, yM);
    rows.push_back(r);
  }
  return rows;
}

TransientComparison transient_1d(const DeviceParams& params, const LineDevice& device, const MarchOptions& opt,
                                 double threshold) {
  const Mesh mesh = build_line_device(device, params.H);
  MicroModel micro(mesh, params);
  MacroModel macro(mesh, params, false);
  TransientComparison c;
  c.V = params.V_appl;
  c.micro = run_transient(micro, micro.initial_state(), opt);
  c.macro = run_transient(macro, macro.initial_state(), opt);
  c.deviation = max_pointwise_deviation(c.micro, c.macro, threshold);
  return c;
}

JVCurve rod_jv(const DeviceParams& params, const Mesh& mesh, const std::vector<double>& biases, const SweepOptions& opt) {
  MacroModel model(mesh, params, true);
  Vector y = model.initial_state();
  return jv_sweep(model, biases, y, opt);
}

double short_circuit_current(const DeviceParams& params, const Mesh& mesh, const SteadyOptions& opt) {
  DeviceParams p = params;
  p.V_appl = 0.0;
  MacroModel model(mesh, p, true);
  Vector y = model.initial_state();
  steady_solve(model, y, opt);
  return signed_current(model, y);
}

std::vector<VocJscRow> voc_jsc_vs_q(const DeviceParams& params, const Mesh& mesh, const std::vector<KdissModel>& models,
                                    const std::vector<double>& Q_values) {
  std::vector<VocJscRow> rows;
  for (KdissModel m : models) {
    DeviceParams p = with_model(params, m);
    p.V_appl = 0.0;
    MacroModel model(mesh, p, true);
    Vector y = model.initial_state();
    for (double Q : Q_values) {
      p.Q = Q;
      model.set_params(p);
      const auto r = find_voc_jsc(model, y, 0.05, 2.5);
      rows.push_back({m, Q, r.voc, r.jsc});
    }
  }
  return rows;
}

std::vector<LengthRow> interface_length_sweep(const DeviceParams& params, const RodGeometry& base,
                                              const std::vector<int>& n_rods, const std::vector<KdissModel>& models,
                                              double h_max) {
  std::vector<LengthRow> rows;
  for (int n : n_rods) {
    RodGeometry g = base;
    g.n_rods = n;
    g.target_h = h_max;
    if (n > 0) {
      g.rod_width = g.electrode_length / (2.0 * n);
      g.target_h = std::min(h_max, g.rod_width / 4);
    }
    const Mesh mesh = build_rod_mesh(g);
    const double len = interface_length(extract_interface(mesh));
    for (KdissModel m : models)
      rows.push_back({n, n > 0 ? g.rod_width : 0.0, len, m, short_circuit_current(with_model(params, m), mesh)});
  }
  return rows;
}

std::vector<AngleRow> angle_sweep(const DeviceParams& params, const RodGeometry& base, const std::vector<double>& angles,
                                  const std::vector<KdissModel>& models) {
  std::vector<AngleRow> rows;
  for (double a : angles) {
    RodGeometry g = base;
    g.incidence_angle_deg = a;
    const Mesh mesh = build_rod_mesh(g);
    const double len = interface_length(extract_interface(mesh));
    for (KdissModel m : models) rows.push_back({a, len, m, short_circuit_current(with_model(params, m), mesh)});
  }
  return rows;
}

std::vector<KdissRow> kdiss_table(const DeviceParams& params, const std::vector<double>& E_values,
                                  const std::vector<double>& chi_values) {
  const double eps = constants::eps0 * 0.5 * (params.eps_r_a + params.eps_r_d);
  const double k0 = params.k_diss0;
  std::vector<KdissRow> rows;
  for (double E : E_values)
    for (double chi : chi_values) {
      const FieldSample fs{E * std::cos(chi), E * std::abs(std::sin(chi))};
      rows.push_back({E, chi, kdiss_averaged_A(params, fs.E_n, eps) / k0, kdiss_hemisphere(params, fs, eps) / k0,
                      kdiss_normal(params, fs, eps) / k0});
    }
  return rows;
}

double inclination_spread(const std::vector<KdissRow>& rows, double E, KdissModel model) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : rows) {
    if (r.E != E) continue;
    const double v = model == KdissModel::B ? r.B : model == KdissModel::C ? r.C : r.A;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > 0)) throw std::invalid_argument("inclination_spread: no rows at the requested field");
  return hi / lo;
}

// ---------------------------------------------------------------------------
// JSON runner

namespace {

/// Reads keys of one config object, records resolved values and rejects
/// unknown keys with their path.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  T get(const std::string& key, const T& def) {
    used_.insert(key);
    if (!j_.contains(key)) {
      resolved[key] = def;
      return def;
    }
    try {
      T v = j_.at(key).get<T>();
      resolved[key] = v;
      return v;
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  json object(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) return json::object();
    if (!j_.at(key).is_object()) throw ConfigError(path_ + "." + key + ": expected an object");
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError(path_ + "." + k + ": unknown key");
  }

  json resolved = json::object();

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<KdissModel> read_models(Reader& r, std::vector<std::string> def) {
  const auto names = r.get<std::vector<std::string>>("models", def);
  std::vector<KdissModel> out;
  for (const auto& n : names) {
    try {
      out.push_back(parse_kdiss_model(n));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(r.path("models") + ": " + e.what());
    }
  }
  return out;
}

struct ParamsSection {
  DeviceParams params;
  json resolved;
};

ParamsSection read_params(Reader& r, const std::string& default_table, double default_Q) {
  const auto table = r.get<std::string>("table", default_table);
  const double V = r.get<double>("V_appl", 0.0);
  DeviceParams p;
  if (table == "table1")
    p = table1_params(V);
  else if (table == "table2")
    p = table2_params(V);
  else
    throw ConfigError(r.path("table") + ": expected table1 or table2");
  if (default_Q > 0) p.Q = default_Q;
  const json overrides = r.object("params");
  try {
    p = params_from_json(overrides, p);
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.path("params") + ": " + e.what());
  }
  r.resolved["params"] = overrides;
  return {p, params_to_json(p)};
}

RodGeometry read_rod(Reader& r, const std::string& key, RodGeometry base) {
  try {
    auto g = rod_geometry_from_json(r.object(key), base);
    r.resolved[key] = to_json(g);
    return g;
  } catch (const ConfigError& e) {
    throw ConfigError(r.path(key) + e.what());
  }
}

LineDevice read_line(Reader& parent, const std::string& key) {
  const json j = parent.object(key);
  Reader r(j, parent.path(key));
  LineDevice d;
  d.length = r.get("length", d.length);
  d.interface_position = r.get("interface_position", d.interface_position);
  d.n_elements = r.get("n_elements", d.n_elements);
  d.min_elements_per_subslab = r.get("min_elements_per_subslab", d.min_elements_per_subslab);
  r.finish();
  parent.resolved[key] = r.resolved;
  return d;
}

MarchOptions read_march(Reader& parent, const std::string& key) {
  const json j = parent.object(key);
  Reader r(j, parent.path(key));
  MarchOptions o;
  o.t_end = r.get("t_end", 1e-3);
  o.dt0 = r.get("dt0", 1e-13);
  o.rtol = r.get("rtol", o.rtol);
  o.atol = r.get("atol", o.atol);
  o.min_dt = r.get("min_dt", o.min_dt);
  o.max_dt = r.get("max_dt", 1e300);
  o.steady_tol = r.get("steady_tol", o.steady_tol);
  r.finish();
  parent.resolved[key] = r.resolved;
  return o;
}

std::vector<double> read_biases(Reader& parent, const std::string& key) {
  const json j = parent.object(key);
  Reader r(j, parent.path(key));
  const double b = r.get("begin", 0.0), e = r.get("end", 1.0), s = r.get("step", 0.05);
  const double flat = r.get("flat_band", 0.6), fs = r.get("fine_step", 0.005), fw = r.get("fine_halfwidth", 0.05);
  r.finish();
  parent.resolved[key] = r.resolved;
  try {
    return bias_grid(b, e, s, flat, fs, fw);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(parent.path(key) + ": " + ex.what());
  }
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& units, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_.precision(17);
    out_ << "# " << units << '\n' << header << '\n';
  }
  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((out_ << (first ? "" : ",") << v, first = false), ...);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

std::string model_name(KdissModel m) { return std::string(to_string(m)); }

std::string fmt_index(std::size_t i) {
  std::ostringstream s;
  s << i;
  return s.str();
}

void write_jv(const std::filesystem::path& path, const JVCurve& c) {
  CsvWriter w(path, "V [V], j [A/m^2] signed (photocurrent positive), j_tot [A/m^2]",
              "V,j,j_tot,converged,iterations,message");
  for (const auto& p : c.points) w.row(p.V, p.j, p.j_tot, p.converged ? 1 : 0, p.iterations, "\"" + p.message + "\"");
}

}  // namespace

DeviceParams params_from_config(const json& cfg) {
  Reader r(cfg, "config");
  r.get<std::string>("kind", "");
  auto p = read_params(r, "table2", 0.0);
  return p.params;
}

RodGeometry rod_geometry_from_json(const json& j, RodGeometry g) {
  Reader r(j, "");
  g.cell_length = r.get("cell_length", g.cell_length);
  g.electrode_length = r.get("electrode_length", g.electrode_length);
  g.rod_length = r.get("rod_length", g.rod_length);
  g.rod_width = r.get("rod_width", g.rod_width);
  g.n_rods = r.get("n_rods", g.n_rods);
  g.incidence_angle_deg = r.get("incidence_angle_deg", g.incidence_angle_deg);
  g.target_h = r.get("target_h", g.target_h);
  r.finish();
  return g;
}

MorphologyGeometry morphology_from_json(const json& j, MorphologyGeometry g) {
  Reader r(j, "");
  g.side = r.get("side", g.side);
  g.cells = r.get("cells", g.cells);
  g.seed = r.get("seed", g.seed);
  g.target_interface_length = r.get("target_interface_length", g.target_interface_length);
  g.blend_layer = r.get("blend_layer", g.blend_layer);
  r.finish();
  return g;
}

json to_json(const RodGeometry& g) {
  return {{"cell_length", g.cell_length}, {"electrode_length", g.electrode_length}, {"rod_length", g.rod_length},
          {"rod_width", g.rod_width},     {"n_rods", g.n_rods},                     {"incidence_angle_deg", g.incidence_angle_deg},
          {"target_h", g.target_h}};
}

json to_json(const MorphologyGeometry& g) {
  return {{"side", g.side},
          {"cells", g.cells},
          {"seed", g.seed},
          {"target_interface_length", g.target_interface_length},
          {"blend_layer", g.blend_layer}};
}

json run_experiment(const json& cfg_in, const std::filesystem::path& outdir) {
  // a manifest can be replayed directly
  const json& cfg = cfg_in.contains("config") && cfg_in.contains("code_version") ? cfg_in.at("config") : cfg_in;
  Reader r(cfg, "config");
  const auto kind = r.get<std::string>("kind", "");
  std::filesystem::create_directories(outdir);
  json manifest = {{"code_version", code_version()}, {"kind", kind}};
  std::vector<std::string> outputs;
  auto out = [&](const std::string& name) {
    outputs.push_back(name);
    return outdir / name;
  };

  if (kind == "micro_macro_1d") {
    auto ps = read_params(r, "table1", 0.0);
    const auto dev = read_line(r, "device");
    const auto H = r.get<std::vector<double>>("H_values", {2e-9, 1e-9, 0.5e-9, 0.25e-9, 0.125e-9});
    r.finish();
    const auto rows = micro_macro_1d(ps.params, dev, H);
    CsvWriter w(out("micro_macro.csv"), "H [m], j [A/m^2], rel [-]", "H,j_micro,j_macro,rel");
    for (const auto& row : rows) w.row(row.H, row.j_micro, row.j_macro, row.rel);
    manifest["params"] = ps.resolved;
  } else if (kind == "transient_1d") {
    const auto V_values = r.get<std::vector<double>>("V_values", {0.0, 0.6});
    const double H = r.get("H", 0.25e-9);
    const double threshold = r.get("threshold", 0.01);
    const json overrides = r.object("params");
    r.resolved["params"] = overrides;
    const auto dev = read_line(r, "device");
    const auto mo = read_march(r, "march");
    r.finish();
    CsvWriter s(out("transient_summary.csv"), "V [V], deviation [-], j [A/m^2]",
                "V,max_deviation,j_micro_final,j_macro_final");
    json plist = json::array();
    for (std::size_t i = 0; i < V_values.size(); ++i) {
      DeviceParams p;
      try {
        p = params_from_json(overrides, table1_params(V_values[i]));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(r.path("params") + ": " + e.what());
      }
      p.H = H;
      const auto c = transient_1d(p, dev, mo, threshold);
      for (auto [name, tr] : {std::pair{"micro", &c.micro}, std::pair{"macro", &c.macro}}) {
        CsvWriter w(out(std::string("transient_") + name + "_" + fmt_index(i) + ".csv"), "t [s], j_tot [A/m^2]",
                    "t,j_tot");
        for (std::size_t k = 0; k < tr->t.size(); ++k) w.row(tr->t[k], tr->j_tot[k]);
      }
      s.row(V_values[i], c.deviation, c.micro.j_tot.back(), c.macro.j_tot.back());
      plist.push_back(params_to_json(p));
    }
    manifest["params"] = plist;
  } else if (kind == "jv_rods" || kind == "complex_morphology") {
    const bool rods = kind == "jv_rods";
    auto ps = read_params(r, "table2", rods ? 0.0 : 1.53e25);
    const auto models = read_models(r, rods ? std::vector<std::string>{"A", "B", "C"} : std::vector<std::string>{"B"});
    const auto Q_values = r.get<std::vector<double>>("Q_values", rods ? std::vector<double>{1.53e23, 1.53e25}
                                                                      : std::vector<double>{1.53e25});
    const auto biases = read_biases(r, "biases");
    Mesh mesh = [&] {
      if (rods) return build_rod_mesh(read_rod(r, "geometry", RodGeometry{}));
      const json j = r.object("geometry");
      MorphologyGeometry g;
      try {
        g = morphology_from_json(j);
      } catch (const ConfigError& e) {
        throw ConfigError(r.path("geometry") + e.what());
      }
      r.resolved["geometry"] = to_json(g);
      return build_morphology_mesh(g);
    }();
    r.finish();
    {
      std::ofstream m(out("mesh.txt"));
      write_mesh(m, mesh);
    }
    CsvWriter s(out("jv_summary.csv"), "Q [m^-3 s^-1], Voc [V], Jsc [A/m^2]", "model,Q,Voc,Jsc");
    for (KdissModel m : models)
      for (std::size_t qi = 0; qi < Q_values.size(); ++qi) {
        DeviceParams p = with_model(ps.params, m);
        p.Q = Q_values[qi];
        Vector y_sc;
        SweepOptions so;
        so.on_point = [&](const JVPoint& pt, const Vector& y) {
          if (std::abs(pt.V) < 1e-12 && pt.converged) y_sc = y;
        };
        MacroModel model(mesh, p, true);
        Vector y = model.initial_state();
        const auto curve = jv_sweep(model, biases, y, so);
        const std::string tag = model_name(m) + "_" + fmt_index(qi);
        write_jv(out("jv_" + tag + ".csv"), curve);
        if (y_sc.size()) export_fields(model, y_sc, out("fields_sc_" + tag + ".csv"));
        double voc = std::numeric_limits<double>::quiet_NaN(), jsc = voc;
        try {
          const auto vj = extract_voc_jsc(curve);
          voc = vj.voc, jsc = vj.jsc;
        } catch (const VocUndefined&) {
        }
        s.row(model_name(m), p.Q, voc, jsc);
      }
    manifest["params"] = ps.resolved;
  } else if (kind == "density_fields") {
    RodGeometry def;
    def.electrode_length = 440e-9;
    def.rod_width = 55e-9;
    def.target_h = 5e-9;
    auto ps = read_params(r, "table2", 1.53e25);
    const auto models = read_models(r, {"A", "B", "C"});
    const auto g = read_rod(r, "geometry", def);
    r.finish();
    const Mesh mesh = build_rod_mesh(g);
    CsvWriter s(out("carrier_totals.csv"), "totals per unit depth [m^-1]", "model,electrons,holes,j_sc");
    for (KdissModel m : models) {
      DeviceParams p = with_model(ps.params, m);
      p.V_appl = 0.0;
      MacroModel model(mesh, p, true);
      Vector y = model.initial_state();
      steady_solve(model, y);
      export_fields(model, y, out("fields_" + model_name(m) + ".csv"));
      const auto t = carrier_totals(model, y);
      s.row(model_name(m), t.electrons, t.holes, signed_current(model, y));
    }
    manifest["params"] = ps.resolved;
  } else if (kind == "voc_jsc_vs_q") {
    auto ps = read_params(r, "table2", 0.0);
    const auto models = read_models(r, {"A", "B", "C"});
    std::vector<double> qdef;
    for (int k = 20; k <= 30; ++k) qdef.push_back(1.53 * std::pow(10.0, k));
    const auto Q_values = r.get<std::vector<double>>("Q_values", qdef);
    const auto g = read_rod(r, "geometry", RodGeometry{});
    r.finish();
    const auto rows = voc_jsc_vs_q(ps.params, build_rod_mesh(g), models, Q_values);
    CsvWriter w(out("voc_jsc.csv"), "Q [m^-3 s^-1], Voc [V], Jsc [A/m^2]", "model,Q,Voc,Jsc");
    for (const auto& row : rows) w.row(model_name(row.model), row.Q, row.voc, row.jsc);
    manifest["params"] = ps.resolved;
  } else if (kind == "interface_length_sweep") {
    RodGeometry def;
    def.electrode_length = 150e-9;
    def.rod_length = 75e-9;
    auto ps = read_params(r, "table2", 1.53e25);
    const auto models = read_models(r, {"A", "B", "C"});
    const auto n_rods = r.get<std::vector<int>>("n_rods", {0, 1, 2, 3, 4, 6, 8, 12});
    const double h_max = r.get("h_max", 3e-9);
    const auto g = read_rod(r, "geometry", def);
    r.finish();
    const auto rows = interface_length_sweep(ps.params, g, n_rods, models, h_max);
    CsvWriter w(out("interface_length.csv"), "W_R [m], length [m], Jsc [A/m^2]", "model,n_rods,W_R,length,Jsc");
    for (const auto& row : rows) w.row(model_name(row.model), row.n_rods, row.rod_width, row.interface_length, row.jsc);
    manifest["params"] = ps.resolved;
  } else if (kind == "angle_sweep") {
    RodGeometry def;
    def.electrode_length = 150e-9;
    def.rod_length = 75e-9;
    def.rod_width = 18.75e-9;
    def.target_h = 2.5e-9;
    auto ps = read_params(r, "table2", 1.53e25);
    const auto models = read_models(r, {"A", "B", "C"});
    const auto angles =
        r.get<std::vector<double>>("angles_deg", {90.0, 87.5, 85.0, 82.5, 80.0, 77.0 + 11.0 / 60.0});
    const auto g = read_rod(r, "geometry", def);
    r.finish();
    const auto rows = angle_sweep(ps.params, g, angles, models);
    CsvWriter w(out("angle.csv"), "alpha [deg], length [m], Jsc [A/m^2]", "model,alpha_deg,length,Jsc");
    for (const auto& row : rows) w.row(model_name(row.model), row.alpha_deg, row.interface_length, row.jsc);
    manifest["params"] = ps.resolved;
  } else if (kind == "kdiss_table") {
    auto ps = read_params(r, "table2", 0.0);
    std::vector<double> edef, cdef;
    for (int k = 0; k <= 30; ++k) edef.push_back(std::pow(10.0, 5.0 + 0.1 * k));
    for (int k = 0; k <= 12; ++k) cdef.push_back(k * std::numbers::pi / 12);
    const auto E = r.get<std::vector<double>>("E_values", edef);
    const auto chi = r.get<std::vector<double>>("chi_values", cdef);
    r.finish();
    const auto rows = kdiss_table(ps.params, E, chi);
    CsvWriter w(out("kdiss.csv"), "E [V/m], chi [rad] from the interface normal, k_diss / k_diss0 [-]",
                "E,chi,A,B,C");
    for (const auto& row : rows) w.row(row.E, row.chi, row.A, row.B, row.C);
    CsvWriter s(out("kdiss_spread.csv"), "E [V/m], max/min over inclinations [-]", "E,spread_B,spread_C");
    for (double e : E) s.row(e, inclination_spread(rows, e, KdissModel::B), inclination_spread(rows, e, KdissModel::C));
    manifest["params"] = ps.resolved;
  } else {
    throw ConfigError("config.kind: unknown experiment '" + kind + "'");
  }

  manifest["config"] = r.resolved;
  manifest["outputs"] = outputs;
  std::ofstream m(outdir / "manifest.json");
  m << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace osc
