#include "oscsim/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace osc {

double total_current(DeviceProblem& problem, const Vector& y) {
  return std::abs(problem.terminal_current(y)) / problem.mesh().boundary_measure(BoundaryTag::cathode);
}

double signed_current(DeviceProblem& problem, const Vector& y) {
  return -problem.terminal_current(y) / problem.mesh().boundary_measure(BoundaryTag::cathode);
}

double contact_balance(DeviceProblem& problem, const Vector& y) {
  const auto c = problem.contact_fluxes(y, TimeDiscretization{});
  const double ref = std::max(std::abs(c.I_cathode), std::abs(c.I_anode));
  return ref > 0 ? (c.I_cathode + c.I_anode) / ref : 0.0;
}

std::vector<double> bias_grid(double v_begin, double v_end, double dv, double v_flat, double fine_dv,
                              double fine_halfwidth) {
  if (!(dv > 0) || !(fine_dv > 0) || v_end < v_begin) throw std::invalid_argument("bias_grid: invalid range or step");
  auto snap = [](double v) { return std::round(v * 1e9) / 1e9; };
  std::vector<double> v;
  for (int k = 0;; ++k) {
    const double x = snap(v_begin + k * dv);
    if (x > v_end + 1e-12) break;
    if (std::abs(x - v_flat) >= fine_halfwidth - 1e-12) v.push_back(x);
  }
  const int nf = static_cast<int>(std::round(2 * fine_halfwidth / fine_dv));
  for (int k = 0; k <= nf; ++k) {
    const double x = snap(v_flat - fine_halfwidth + k * fine_dv);
    if (x >= v_begin - 1e-12 && x <= v_end + 1e-12) v.push_back(x);
  }
  v.push_back(snap(v_end));
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }), v.end());
  return v;
}

namespace {

JVPoint solve_point(DeviceProblem& problem, double V, Vector& y, const SteadyOptions& opt) {
  DeviceParams p = problem.params();
  p.V_appl = V;
  problem.set_params(p);
  JVPoint pt;
  pt.V = V;
  Vector trial = y;
  problem.apply_dirichlet_values(trial);
  try {
    const auto rep = steady_solve(problem, trial, opt);
    pt.converged = true;
    pt.iterations = rep.iterations;
    pt.residual_norm = rep.residual_norm;
    y = trial;
    pt.j = signed_current(problem, y);
    pt.j_tot = std::abs(pt.j);
  } catch (const std::exception& e) {
    pt.message = e.what();
    pt.j = pt.j_tot = std::numeric_limits<double>::quiet_NaN();
  }
  return pt;
}

}  // namespace

JVCurve jv_sweep(DeviceProblem& problem, const std::vector<double>& biases, Vector& y, const SweepOptions& opt) {
  for (std::size_t k = 1; k < biases.size(); ++k)
    if (!(biases[k] > biases[k - 1])) throw std::invalid_argument("jv_sweep: biases must be strictly increasing");
  JVCurve curve;
  curve.kdiss_model = std::string(to_string(problem.params().kdiss_model));
  for (double V : biases) {
    auto pt = solve_point(problem, V, y, opt.steady);
    if (opt.on_point) opt.on_point(pt, y);
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

VocJsc extract_voc_jsc(const JVCurve& curve) {
  VocJsc r;
  const auto& pts = curve.points;
  auto sc = std::find_if(pts.begin(), pts.end(), [](const JVPoint& p) { return std::abs(p.V) < 1e-12; });
  if (sc == pts.end()) throw VocUndefined("curve has no point at V = 0");
  r.jsc = std::abs(sc->j);
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const auto &a = pts[k - 1], &b = pts[k];
    if (std::isfinite(a.j) && std::isfinite(b.j) && a.j > 0 && b.j <= 0) {
      r.voc = a.V + (b.V - a.V) * a.j / (a.j - b.j);
      return r;
    }
  }
  throw VocUndefined("signed current does not change sign on the curve");
}

VocJsc find_voc_jsc(DeviceProblem& problem, Vector& y, double dv, double v_max, double tol_v, const SteadyOptions& opt) {
  auto pt = solve_point(problem, 0.0, y, opt);
  if (!pt.converged) throw TimeIntegrationError("short-circuit solve failed: " + pt.message);
  VocJsc r;
  r.jsc = pt.j_tot;
  const Vector y_sc = y;
  double va = 0.0, ja = pt.j;
  Vector ya = y;
  double vb = 0.0, jb = 0.0;
  Vector yb;
  double step = dv;
  bool bracketed = false;
  while (va < v_max) {
    Vector trial = ya;
    const double v = std::min(va + step, v_max);
    auto q = solve_point(problem, v, trial, opt);
    if (!q.converged) {
      step *= 0.5;
      if (step < dv / 64) throw TimeIntegrationError("Voc search failed at V = " + std::to_string(v) + ": " + q.message);
      continue;
    }
    if (q.j <= 0) {
      vb = v, jb = q.j, yb = trial;
      bracketed = true;
      break;
    }
    va = v, ja = q.j, ya = trial;
    step = dv;
  }
  if (!bracketed) {
    y = y_sc;
    throw VocUndefined("no sign change of the current up to " + std::to_string(v_max) + " V");
  }
  while (vb - va > tol_v) {
    Vector trial = ya;
    const double vm = 0.5 * (va + vb);
    auto q = solve_point(problem, vm, trial, opt);
    if (!q.converged) break;
    if (q.j > 0)
      va = vm, ja = q.j, ya = trial;
    else
      vb = vm, jb = q.j, yb = trial;
  }
  r.voc = va + (vb - va) * ja / (ja - jb);
  DeviceParams p = problem.params();
  p.V_appl = 0.0;
  problem.set_params(p);
  y = y_sc;
  return r;
}

Transient run_transient(DeviceProblem& problem, const Vector& y0, const MarchOptions& opt) {
  Transient tr;
  const double area = problem.mesh().boundary_measure(BoundaryTag::cathode);
  tr.result = march(problem, y0, opt, [&](const StepRecord& r, const Vector& y) {
    tr.t.push_back(r.t);
    tr.j_tot.push_back(std::abs(problem.terminal_current(y)) / area);
  });
  return tr;
}

double max_pointwise_deviation(const Transient& a, const Transient& b, double threshold) {
  if (a.t.empty() || b.t.size() < 2) throw std::invalid_argument("max_pointwise_deviation: empty trajectory");
  const double ref = a.j_tot.back();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.t.size(); ++i) {
    const double t = a.t[i];
    if (a.j_tot[i] < threshold * ref || t > b.t.back()) continue;
    const auto it = std::lower_bound(b.t.begin(), b.t.end(), t);
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(it - b.t.begin()));
    const double s = (t - b.t[k - 1]) / (b.t[k] - b.t[k - 1]);
    const double jb = b.j_tot[k - 1] + s * (b.j_tot[k] - b.j_tot[k - 1]);
    worst = std::max(worst, std::abs(jb - a.j_tot[i]) / a.j_tot[i]);
  }
  return worst;
}

void export_fields(const DeviceProblem& problem, const Vector& y, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& mesh = problem.mesh();
  const auto e = problem.nodal(Field::exciton, y);
  const auto P = problem.nodal(Field::polaron, y);
  const auto n = problem.nodal(Field::electron, y);
  const auto p = problem.nodal(Field::hole, y);
  const auto phi = problem.nodal(Field::potential, y);
  out << "# x, y [m]; e, n, p [m^-3]; P [m^-2] on the interface (macro) or [m^-3] on the slab (micro); phi [V]\n";
  out << "node,x,y,e,P,n,p,phi\n";
  out.precision(17);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto& x = mesh.node(static_cast<int>(i));
    out << i << ',' << x[0] << ',' << x[1] << ',' << e[i] << ',' << P[i] << ',' << n[i] << ',' << p[i] << ','
        << phi[i] << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

FieldTable read_fields(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  FieldTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    if (t.columns.empty()) {
      while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (row.size() != t.columns.size()) throw std::runtime_error("malformed row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

CarrierTotals carrier_totals(const DeviceProblem& problem, const Vector& y) {
  return {problem.field_integral(Field::electron, y), problem.field_integral(Field::hole, y)};
}

}  // namespace osc
