#include "oscsim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace osc {

namespace {

using Edge = std::pair<int, int>;

Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

[[noreturn]] void fail(MeshError::Kind kind, const std::string& msg) { throw MeshError(kind, msg); }

ElementGeometry compute_geometry(int dim, const std::vector<Point>& x, const std::array<int, 3>& el) {
  ElementGeometry g;
  g.n_vertices = dim + 1;
  if (dim == 1) {
    const double h = x[el[1]][0] - x[el[0]][0];
    g.measure = h;
    g.grad[0] = {-1.0 / h, 0.0};
    g.grad[1] = {1.0 / h, 0.0};
    return g;
  }
  const auto& p0 = x[el[0]];
  const auto& p1 = x[el[1]];
  const auto& p2 = x[el[2]];
  const double two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
  g.measure = 0.5 * two_a;
  g.grad[0] = {(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a};
  g.grad[1] = {(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a};
  g.grad[2] = {(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a};
  return g;
}

}  // namespace

std::string_view to_string(Region r) {
  switch (r) {
    case Region::donor: return "donor";
    case Region::acceptor: return "acceptor";
    case Region::slab_donor: return "slab_d";
    case Region::slab_acceptor: return "slab_a";
  }
  return "?";
}

std::string_view to_string(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::cathode: return "cathode";
    case BoundaryTag::anode: return "anode";
    case BoundaryTag::lateral_left: return "lat_l";
    case BoundaryTag::lateral_right: return "lat_r";
  }
  return "?";
}

std::optional<Region> parse_region(std::string_view s) {
  if (s == "donor") return Region::donor;
  if (s == "acceptor") return Region::acceptor;
  if (s == "slab_d") return Region::slab_donor;
  if (s == "slab_a") return Region::slab_acceptor;
  return std::nullopt;
}

std::optional<BoundaryTag> parse_boundary_tag(std::string_view s) {
  if (s == "cathode") return BoundaryTag::cathode;
  if (s == "anode") return BoundaryTag::anode;
  if (s == "lat_l") return BoundaryTag::lateral_left;
  if (s == "lat_r") return BoundaryTag::lateral_right;
  return std::nullopt;
}

Mesh Mesh::create(int dimension, std::vector<Point> nodes, std::vector<std::array<int, 3>> elements,
                  std::vector<Region> regions, std::vector<BoundaryFacet> boundary) {
  using K = MeshError::Kind;
  if (dimension != 1 && dimension != 2) fail(K::invalid_geometry, "mesh dimension must be 1 or 2");
  if (elements.empty()) fail(K::invalid_geometry, "mesh has no elements");
  if (regions.size() != elements.size()) fail(K::invalid_geometry, "one region label per element required");
  const int nv = dimension + 1;
  const int nn = static_cast<int>(nodes.size());

  Mesh m;
  m.dim_ = dimension;
  std::set<std::array<int, 3>> seen;
  for (std::size_t k = 0; k < elements.size(); ++k) {
    auto& el = elements[k];
    if (dimension == 1) el[2] = -1;
    for (int i = 0; i < nv; ++i) {
      if (el[i] < 0 || el[i] >= nn) fail(K::invalid_geometry, "element " + std::to_string(k) + " references a missing node");
      for (int j = 0; j < i; ++j)
        if (el[i] == el[j]) fail(K::invalid_geometry, "element " + std::to_string(k) + " repeats a node");
    }
    auto key = el;
    std::sort(key.begin(), key.begin() + nv);
    if (!seen.insert(key).second) fail(K::non_conformal, "duplicate element " + std::to_string(k));
    // counter-clockwise triangles, left-to-right segments
    auto g = compute_geometry(dimension, nodes, el);
    if (g.measure < 0) {
      std::swap(el[nv - 2], el[nv - 1]);
      g = compute_geometry(dimension, nodes, el);
    }
    const double scale = [&] {
      double s = 0;
      for (int i = 1; i < nv; ++i)
        s = std::max(s, std::hypot(nodes[el[i]][0] - nodes[el[0]][0], nodes[el[i]][1] - nodes[el[0]][1]));
      return s;
    }();
    if (!(g.measure > 1e-14 * std::pow(scale, dimension)))
      fail(K::invalid_geometry, "degenerate element " + std::to_string(k));
    m.geometry_.push_back(g);
  }

  // Conformity: every facet is shared by at most two elements with opposite
  // orientation; facets used once must be tagged boundary facets.
  std::map<Edge, std::vector<std::pair<int, int>>> facet_use;  // facet -> (element, direction)
  for (std::size_t k = 0; k < elements.size(); ++k) {
    const auto& el = elements[k];
    if (dimension == 1) {
      facet_use[{el[0], el[0]}].push_back({static_cast<int>(k), +1});
      facet_use[{el[1], el[1]}].push_back({static_cast<int>(k), -1});
    } else {
      for (int i = 0; i < 3; ++i) {
        const int a = el[i], b = el[(i + 1) % 3];
        facet_use[make_edge(a, b)].push_back({static_cast<int>(k), a < b ? +1 : -1});
      }
    }
  }
  std::set<Edge> boundary_keys;
  for (auto& f : boundary) {
    if (dimension == 1) f.nodes[1] = f.nodes[0];
    for (int i = 0; i < dimension; ++i)
      if (f.nodes[i] < 0 || f.nodes[i] >= nn) fail(K::invalid_geometry, "boundary facet references a missing node");
    const Edge key = make_edge(f.nodes[0], f.nodes[1]);
    auto it = facet_use.find(key);
    if (it == facet_use.end() || it->second.size() != 1)
      fail(K::non_conformal, "boundary facet (" + std::to_string(f.nodes[0]) + "," + std::to_string(f.nodes[1]) +
                                 ") is not a free facet of the mesh");
    if (!boundary_keys.insert(key).second) fail(K::non_conformal, "boundary facet listed twice");
  }
  for (const auto& [key, uses] : facet_use) {
    if (uses.size() > 2) fail(K::non_conformal, "facet shared by more than two elements");
    if (uses.size() == 2 && uses[0].second == uses[1].second)
      fail(K::non_conformal, "inconsistent orientation across a shared facet (overlapping elements)");
    if (uses.size() == 1 && !boundary_keys.count(key))
      fail(K::non_conformal, "untagged free facet at node " + std::to_string(key.first) + " (hanging node or hole)");
  }

  const bool has_donor = std::any_of(regions.begin(), regions.end(), [](Region r) { return is_donor_side(r); });
  const bool has_acceptor = std::any_of(regions.begin(), regions.end(), [](Region r) { return is_acceptor_side(r); });
  if (!has_donor || !has_acceptor) fail(K::invalid_geometry, "donor and acceptor element sets must be nonempty");

  m.nodes_ = std::move(nodes);
  m.elements_ = std::move(elements);
  m.regions_ = std::move(regions);
  m.boundary_ = std::move(boundary);

  const auto cathode = m.boundary_nodes(BoundaryTag::cathode);
  const auto anode = m.boundary_nodes(BoundaryTag::anode);
  if (cathode.empty() || anode.empty()) fail(K::invalid_geometry, "cathode and anode facet sets must be nonempty");
  std::vector<int> common;
  std::set_intersection(cathode.begin(), cathode.end(), anode.begin(), anode.end(), std::back_inserter(common));
  if (!common.empty()) fail(K::invalid_geometry, "cathode and anode share nodes");
  return m;
}

std::vector<int> Mesh::boundary_nodes(BoundaryTag tag) const {
  std::vector<int> out;
  for (const auto& f : boundary_)
    if (f.tag == tag)
      for (int i = 0; i < dim_; ++i) out.push_back(f.nodes[i]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double Mesh::boundary_measure(BoundaryTag tag) const {
  double s = 0;
  for (const auto& f : boundary_) {
    if (f.tag != tag) continue;
    if (dim_ == 1) {
      s += 1.0;
    } else {
      const auto& a = nodes_[f.nodes[0]];
      const auto& b = nodes_[f.nodes[1]];
      s += std::hypot(b[0] - a[0], b[1] - a[1]);
    }
  }
  return s;
}

double Mesh::total_measure() const {
  double s = 0;
  for (const auto& g : geometry_) s += g.measure;
  return s;
}

double Mesh::measure_of(bool (*pred)(Region)) const {
  double s = 0;
  for (std::size_t k = 0; k < elements_.size(); ++k)
    if (pred(regions_[k])) s += geometry_[k].measure;
  return s;
}

double Mesh::length_scale() const {
  double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
  for (const auto& p : nodes_)
    for (int d = 0; d < 2; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  return std::hypot(hi[0] - lo[0], hi[1] - lo[1]);
}

// ---------------------------------------------------------------------------
// Builders

Mesh build_line_mesh(double length, int n_elements, double interface_position, std::optional<double> slab_half_width,
                     int min_elements_per_subslab) {
  using K = MeshError::Kind;
  if (!(length > 0) || !(interface_position > 0) || !(interface_position < length))
    fail(K::invalid_geometry, "interface must lie strictly inside (0, length)");
  std::vector<double> breaks{0.0};
  std::vector<int> counts;
  std::vector<Region> seg_region;
  if (!slab_half_width) {
    if (n_elements < 2) fail(K::refinement_required, "at least two elements are needed to place the interface");
    int n1 = static_cast<int>(std::lround(n_elements * interface_position / length));
    n1 = std::clamp(n1, 1, n_elements - 1);
    breaks.insert(breaks.end(), {interface_position, length});
    counts = {n1, n_elements - n1};
    seg_region = {Region::donor, Region::acceptor};
  } else {
    const double H = *slab_half_width;
    if (!(H > 0) || !(interface_position - H > 0) || !(interface_position + H < length))
      fail(K::invalid_geometry, "slab [x_I - H, x_I + H] must lie strictly inside (0, length)");
    const int k = std::max(min_elements_per_subslab, static_cast<int>(std::lround(n_elements * H / length)));
    const int bulk = n_elements - 2 * k;
    if (bulk < 2)
      fail(K::refinement_required, "slab needs " + std::to_string(2 * k) + " elements; " + std::to_string(n_elements) +
                                       " is too few to also mesh the bulk");
    const double l1 = interface_position - H, l2 = length - interface_position - H;
    int n1 = static_cast<int>(std::lround(bulk * l1 / (l1 + l2)));
    n1 = std::clamp(n1, 1, bulk - 1);
    breaks.insert(breaks.end(), {interface_position - H, interface_position, interface_position + H, length});
    counts = {n1, k, k, bulk - n1};
    seg_region = {Region::donor, Region::slab_donor, Region::slab_acceptor, Region::acceptor};
  }

  std::vector<Point> nodes{{0.0, 0.0}};
  std::vector<std::array<int, 3>> elements;
  std::vector<Region> regions;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    for (int i = 1; i <= counts[s]; ++i) {
      const double x = (i == counts[s]) ? b : a + (b - a) * static_cast<double>(i) / counts[s];
      nodes.push_back({x, 0.0});
      const int last = static_cast<int>(nodes.size()) - 1;
      elements.push_back({last - 1, last, -1});
      regions.push_back(seg_region[s]);
    }
  }
  std::vector<BoundaryFacet> boundary{{{0, 0}, BoundaryTag::anode},
                                      {{static_cast<int>(nodes.size()) - 1, static_cast<int>(nodes.size()) - 1},
                                       BoundaryTag::cathode}};
  return Mesh::create(1, std::move(nodes), std::move(elements), std::move(regions), std::move(boundary));
}

namespace {

std::vector<double> subdivide(const std::vector<double>& breaks, double h) {
  std::vector<double> out{breaks.front()};
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    const int m = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-9)));
    for (int i = 1; i <= m; ++i) out.push_back(i == m ? b : a + (b - a) * i / m);
  }
  return out;
}

// Triangulates a structured (nx+1) x (ny+1) node grid; labels per cell.
Mesh triangulate_grid(const std::vector<Point>& nodes, int nx, int ny, const std::vector<Region>& cell_region) {
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> elements;
  std::vector<Region> regions;
  elements.reserve(2 * static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      const double dac = std::hypot(nodes[c][0] - nodes[a][0], nodes[c][1] - nodes[a][1]);
      const double dbd = std::hypot(nodes[d][0] - nodes[b][0], nodes[d][1] - nodes[b][1]);
      bool use_ac;
      if (std::abs(dac - dbd) < 1e-9 * (dac + dbd))
        use_ac = ((i + j) % 2 == 0);  // checkerboard keeps rectangular grids mirror symmetric
      else
        use_ac = dac < dbd;
      const Region r = cell_region[static_cast<std::size_t>(j) * nx + i];
      if (use_ac) {
        elements.push_back({a, b, c});
        elements.push_back({a, c, d});
      } else {
        elements.push_back({a, b, d});
        elements.push_back({b, c, d});
      }
      regions.push_back(r);
      regions.push_back(r);
    }
  }
  std::vector<BoundaryFacet> boundary;
  for (int i = 0; i < nx; ++i) {
    boundary.push_back({{id(i, 0), id(i + 1, 0)}, BoundaryTag::anode});
    boundary.push_back({{id(i, ny), id(i + 1, ny)}, BoundaryTag::cathode});
  }
  for (int j = 0; j < ny; ++j) {
    boundary.push_back({{id(0, j), id(0, j + 1)}, BoundaryTag::lateral_left});
    boundary.push_back({{id(nx, j), id(nx, j + 1)}, BoundaryTag::lateral_right});
  }
  return Mesh::create(2, nodes, std::move(elements), std::move(regions), std::move(boundary));
}

}  // namespace

double rod_interface_length(const RodGeometry& g) {
  if (g.n_rods == 0) return g.electrode_length;
  const double alpha = g.incidence_angle_deg * std::numbers::pi / 180.0;
  return g.electrode_length + 2.0 * g.n_rods * g.rod_length / std::sin(alpha);
}

Mesh build_rod_mesh(const RodGeometry& g) {
  using K = MeshError::Kind;
  if (!(g.cell_length > 0) || !(g.electrode_length > 0) || !(g.target_h > 0) || g.n_rods < 0)
    fail(K::invalid_geometry, "rod device dimensions must be positive");
  const double L = g.cell_length, W = g.electrode_length, h = g.target_h;

  std::vector<double> xi_breaks{0.0};
  std::vector<double> y_breaks;
  std::vector<std::pair<double, double>> rods;  // reference (mid-height) extents
  double shear = 0.0, y_b = 0.5 * L, y_t = 0.5 * L;
  if (g.n_rods == 0) {
    y_breaks = {0.0, 0.5 * L, L};
  } else {
    const double pitch = W / g.n_rods;
    if (!(g.rod_width > 0) || !(g.rod_width < pitch))
      fail(K::invalid_geometry, "rod width must be positive and smaller than the rod pitch L_elec/n_rods");
    if (!(g.rod_length > 0) || !(g.rod_length < L)) fail(K::invalid_geometry, "rods must fit between the contacts");
    if (g.rod_width / h < 4.0 - 1e-9)
      fail(K::refinement_required, "target_h must resolve the rod width with at least 4 elements");
    if (!(g.incidence_angle_deg > 0) || !(g.incidence_angle_deg < 180))
      fail(K::invalid_geometry, "incidence angle must lie in (0, 180) degrees");
    if (std::abs(g.incidence_angle_deg - 90.0) > 1e-12) {
      const double a = g.incidence_angle_deg * std::numbers::pi / 180.0;
      shear = g.rod_length * std::cos(a) / std::sin(a);
    }
    if (std::abs(shear) >= pitch - g.rod_width)
      fail(K::self_intersecting, "inclined rods cross the lateral period boundary at this incidence angle");
    y_b = 0.5 * (L - g.rod_length);
    y_t = y_b + g.rod_length;
    y_breaks = {0.0, y_b, y_t, L};
    for (int k = 0; k < g.n_rods; ++k) {
      const double c = (k + 0.5) * pitch;
      rods.emplace_back(c - 0.5 * g.rod_width, c + 0.5 * g.rod_width);
      xi_breaks.push_back(c - 0.5 * g.rod_width);
      xi_breaks.push_back(c + 0.5 * g.rod_width);
    }
  }
  xi_breaks.push_back(W);
  const auto xi = subdivide(xi_breaks, h);
  const auto ys = subdivide(y_breaks, h);
  const int nx = static_cast<int>(xi.size()) - 1, ny = static_cast<int>(ys.size()) - 1;

  const double xi_lo = rods.empty() ? 0.0 : rods.front().first;
  const double xi_hi = rods.empty() ? W : rods.back().second;
  auto taper = [&](double x) {
    if (x <= 0.0 || x >= W) return 0.0;
    if (x < xi_lo) return x / xi_lo;
    if (x > xi_hi) return (W - x) / (W - xi_hi);
    return 1.0;
  };
  auto sigma = [&](double y) {
    if (shear == 0.0) return 0.0;
    const double t = std::clamp((y - y_b) / (y_t - y_b), 0.0, 1.0);
    return shear * (0.5 - t);
  };

  std::vector<Point> nodes;
  nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const double x = (i == 0) ? 0.0 : (i == nx ? W : xi[i] + sigma(ys[j]) * taper(xi[i]));
      nodes.push_back({x, ys[j]});
    }

  std::vector<Region> cell_region(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    const double yc = 0.5 * (ys[j] + ys[j + 1]);
    for (int i = 0; i < nx; ++i) {
      const double xc = 0.5 * (xi[i] + xi[i + 1]);
      bool donor;
      if (g.n_rods == 0) {
        donor = yc < 0.5 * L;
      } else if (yc < y_b) {
        donor = true;
      } else if (yc > y_t) {
        donor = false;
      } else {
        donor = std::any_of(rods.begin(), rods.end(), [&](auto r) { return xc > r.first && xc < r.second; });
      }
      cell_region[static_cast<std::size_t>(j) * nx + i] = donor ? Region::donor : Region::acceptor;
    }
  }
  return triangulate_grid(nodes, nx, ny, cell_region);
}

namespace {

// donor = true
std::vector<char> morphology_labels(const MorphologyGeometry& g, double amplitude,
                                    const std::vector<std::array<double, 5>>& modes) {
  const int n = g.cells;
  std::vector<double> noise(static_cast<std::size_t>(n) * n, 0.0);
  double peak = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double x = (i + 0.5) / n, y = (j + 0.5) / n;
      double s = 0;
      for (const auto& m : modes)
        s += m[2] * std::cos(2 * std::numbers::pi * m[0] * x + m[3]) * std::sin(std::numbers::pi * m[1] * y + m[4]);
      noise[static_cast<std::size_t>(j) * n + i] = s;
      peak = std::max(peak, std::abs(s));
    }
  std::vector<char> donor(noise.size());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double y = (j + 0.5) / n;
      const std::size_t k = static_cast<std::size_t>(j) * n + i;
      if (y < g.blend_layer)
        donor[k] = 1;
      else if (y > 1.0 - g.blend_layer)
        donor[k] = 0;
      else
        donor[k] = (y - 0.5) + amplitude * noise[k] / peak < 0.0;
    }
  // no interface across the periodic seam
  for (int j = 0; j < n; ++j) donor[static_cast<std::size_t>(j) * n + n - 1] = donor[static_cast<std::size_t>(j) * n];

  auto flood = [&](char phase, int start_row) {
    std::vector<char> reached(donor.size(), 0);
    std::vector<int> stack;
    for (int i = 0; i < n; ++i) {
      const int k = start_row * n + i;
      if (donor[k] == phase) {
        reached[k] = 1;
        stack.push_back(k);
      }
    }
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      const int i = k % n, j = k / n;
      const int nb[4] = {j * n + (i + 1) % n, j * n + (i + n - 1) % n, j > 0 ? k - n : -1, j + 1 < n ? k + n : -1};
      for (int q : nb)
        if (q >= 0 && !reached[q] && donor[q] == phase) {
          reached[q] = 1;
          stack.push_back(q);
        }
    }
    for (std::size_t k = 0; k < donor.size(); ++k)
      if (donor[k] == phase && !reached[k]) donor[k] = !phase;
  };
  flood(1, 0);
  flood(0, n - 1);
  return donor;
}

double staircase_length(const std::vector<char>& donor, int n, double pixel) {
  double len = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * n + i;
      if (i + 1 < n && donor[k] != donor[k + 1]) len += pixel;
      if (j + 1 < n && donor[k] != donor[k + n]) len += pixel;
    }
  return len;
}

}  // namespace

Mesh build_morphology_mesh(const MorphologyGeometry& g) {
  using K = MeshError::Kind;
  if (g.cells < 8 || !(g.side > 0) || !(g.blend_layer > 0) || !(g.blend_layer < 0.5))
    fail(K::invalid_geometry, "morphology needs at least 8 cells per side and a blend layer in (0, 0.5)");
  std::mt19937 rng(g.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::array<double, 5>> modes;
  for (int kx = 1; kx <= 5; ++kx)
    for (int ky = 1; ky <= 5; ++ky) {
      const double amp = (unit(rng) - 0.5) / std::sqrt(double(kx * kx + ky * ky));
      modes.push_back({double(kx), double(ky), amp, 2 * std::numbers::pi * unit(rng), 2 * std::numbers::pi * unit(rng)});
    }
  const int n = g.cells;
  const double pixel = g.side / n;
  std::vector<char> best;
  double best_err = 1e300;
  for (int s = 0; s <= 80; ++s) {
    const double amplitude = 0.025 * s;
    auto labels = morphology_labels(g, amplitude, modes);
    const double err = std::abs(staircase_length(labels, n, pixel) - g.target_interface_length);
    if (err < best_err) {
      best_err = err;
      best = std::move(labels);
    }
  }
  std::vector<Point> nodes;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) nodes.push_back({i == n ? g.side : pixel * i, j == n ? g.side : pixel * j});
  std::vector<Region> cell_region(best.size());
  for (std::size_t k = 0; k < best.size(); ++k) cell_region[k] = best[k] ? Region::donor : Region::acceptor;
  return triangulate_grid(nodes, n, n, cell_region);
}

// ---------------------------------------------------------------------------
// Text I/O

namespace {

struct LineReader {
  std::istream& in;
  int line_no = 0;
  bool next(std::istringstream& ss) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      ss.clear();
      ss.str(line);
      return true;
    }
    return false;
  }
  [[noreturn]] void error(const std::string& what) const {
    throw MeshError(MeshError::Kind::parse, "mesh parse error at line " + std::to_string(line_no) + ": " + what);
  }
};

}  // namespace

Mesh load_triangle_mesh(std::istream& in) {
  LineReader rd{in};
  std::istringstream ss;
  if (!rd.next(ss)) rd.error("empty input");
  std::string magic;
  int dim = 0;
  long n_nodes = -1, n_el = -1, n_bd = -1;
  if (!(ss >> magic >> dim >> n_nodes >> n_el >> n_bd) || magic != "oscmesh")
    rd.error("expected header 'oscmesh <dim> <n_nodes> <n_elements> <n_boundary_facets>'");
  if ((dim != 1 && dim != 2) || n_nodes < 2 || n_el < 1 || n_bd < 0) rd.error("invalid header values");
  std::string extra;
  auto check_end = [&] {
    if (ss >> extra) rd.error("unexpected trailing token '" + extra + "'");
  };

  std::vector<Point> nodes(static_cast<std::size_t>(n_nodes), Point{0.0, 0.0});
  for (auto& p : nodes) {
    if (!rd.next(ss)) rd.error("unexpected end of file in node section");
    if (!(ss >> p[0])) rd.error("bad node coordinate");
    if (dim == 2 && !(ss >> p[1])) rd.error("bad node coordinate");
    check_end();
  }
  std::vector<std::array<int, 3>> elements(static_cast<std::size_t>(n_el), {-1, -1, -1});
  std::vector<Region> regions;
  for (auto& el : elements) {
    if (!rd.next(ss)) rd.error("unexpected end of file in element section");
    for (int i = 0; i <= dim; ++i)
      if (!(ss >> el[i])) rd.error("bad element node index");
    std::string label;
    if (!(ss >> label)) rd.error("missing region label");
    const auto r = parse_region(label);
    if (!r) throw MeshError(MeshError::Kind::unknown_label,
                            "mesh parse error at line " + std::to_string(rd.line_no) + ": unknown region '" + label + "'");
    regions.push_back(*r);
    check_end();
  }
  std::vector<BoundaryFacet> boundary(static_cast<std::size_t>(n_bd));
  for (auto& f : boundary) {
    if (!rd.next(ss)) rd.error("unexpected end of file in boundary section");
    for (int i = 0; i < dim; ++i)
      if (!(ss >> f.nodes[i])) rd.error("bad boundary node index");
    std::string label;
    if (!(ss >> label)) rd.error("missing boundary tag");
    const auto t = parse_boundary_tag(label);
    if (!t) throw MeshError(MeshError::Kind::unknown_label,
                            "mesh parse error at line " + std::to_string(rd.line_no) + ": unknown tag '" + label + "'");
    f.tag = *t;
    check_end();
  }
  if (rd.next(ss)) rd.error("trailing content after boundary section");
  return Mesh::create(dim, std::move(nodes), std::move(elements), std::move(regions), std::move(boundary));
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  const int dim = mesh.dimension();
  out << "oscmesh " << dim << ' ' << mesh.num_nodes() << ' ' << mesh.num_elements() << ' '
      << mesh.boundary_facets().size() << '\n';
  const auto old = out.precision(17);
  for (const auto& p : mesh.nodes()) {
    out << p[0];
    if (dim == 2) out << ' ' << p[1];
    out << '\n';
  }
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    const auto& el = mesh.element(k);
    for (int i = 0; i <= dim; ++i) out << el[i] << ' ';
    out << to_string(mesh.region(k)) << '\n';
  }
  for (const auto& f : mesh.boundary_facets()) {
    for (int i = 0; i < dim; ++i) out << f.nodes[i] << ' ';
    out << to_string(f.tag) << '\n';
  }
  out.precision(old);
}

// ---------------------------------------------------------------------------
// Interface and periodicity

InterfaceSet extract_interface(const Mesh& mesh) {
  InterfaceSet out;
  const int dim = mesh.dimension();
  std::map<Edge, std::vector<int>> owners;
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    const auto& el = mesh.element(k);
    if (dim == 1) {
      owners[{el[0], el[0]}].push_back(static_cast<int>(k));
      owners[{el[1], el[1]}].push_back(static_cast<int>(k));
    } else {
      for (int i = 0; i < 3; ++i) owners[make_edge(el[i], el[(i + 1) % 3])].push_back(static_cast<int>(k));
    }
  }
  auto centroid = [&](int k) {
    const auto& el = mesh.element(static_cast<std::size_t>(k));
    Point c{0, 0};
    for (int i = 0; i <= dim; ++i) {
      c[0] += mesh.node(el[i])[0] / (dim + 1);
      c[1] += mesh.node(el[i])[1] / (dim + 1);
    }
    return c;
  };
  for (const auto& [edge, elems] : owners) {
    if (elems.size() != 2) continue;
    const Region r0 = mesh.region(elems[0]), r1 = mesh.region(elems[1]);
    int d = -1, a = -1;
    if (is_donor_side(r0) && is_acceptor_side(r1)) {
      d = elems[0];
      a = elems[1];
    } else if (is_donor_side(r1) && is_acceptor_side(r0)) {
      d = elems[1];
      a = elems[0];
    } else {
      continue;
    }
    InterfaceFacet f;
    f.donor_element = d;
    f.acceptor_element = a;
    const Point ca = centroid(a);
    if (dim == 1) {
      f.nodes = {edge.first, -1};
      f.measure = 1.0;
      f.normal = {ca[0] > mesh.node(edge.first)[0] ? 1.0 : -1.0, 0.0};
    } else {
      f.nodes = {edge.first, edge.second};
      const auto& p = mesh.node(edge.first);
      const auto& q = mesh.node(edge.second);
      const double tx = q[0] - p[0], ty = q[1] - p[1];
      const double len = std::hypot(tx, ty);
      f.measure = len;
      Point nrm{ty / len, -tx / len};
      const double mx = 0.5 * (p[0] + q[0]), my = 0.5 * (p[1] + q[1]);
      if (nrm[0] * (ca[0] - mx) + nrm[1] * (ca[1] - my) < 0) nrm = {-nrm[0], -nrm[1]};
      f.normal = nrm;
    }
    out.facets.push_back(f);
    for (int i = 0; i < dim; ++i) out.nodes.push_back(f.nodes[i]);
  }
  if (out.facets.empty()) throw MeshError(MeshError::Kind::empty_interface, "mesh has no donor/acceptor interface");
  std::sort(out.nodes.begin(), out.nodes.end());
  out.nodes.erase(std::unique(out.nodes.begin(), out.nodes.end()), out.nodes.end());
  return out;
}

double interface_length(const InterfaceSet& iface) {
  double s = 0;
  for (const auto& f : iface.facets) s += f.measure;
  return s;
}

PeriodicPairing pair_periodic(const Mesh& mesh) {
  PeriodicPairing out;
  if (mesh.dimension() == 1) return out;
  auto left = mesh.boundary_nodes(BoundaryTag::lateral_left);
  auto right = mesh.boundary_nodes(BoundaryTag::lateral_right);
  if (left.empty() && right.empty()) return out;
  if (left.size() != right.size())
    throw MeshError(MeshError::Kind::periodic_mismatch, "lateral boundaries carry different node counts");
  auto by_height = [&](int a, int b) { return mesh.node(a)[1] < mesh.node(b)[1]; };
  std::sort(left.begin(), left.end(), by_height);
  std::sort(right.begin(), right.end(), by_height);
  const double tol = 1e-12 * mesh.length_scale();
  for (std::size_t i = 0; i < left.size(); ++i) {
    if (std::abs(mesh.node(left[i])[1] - mesh.node(right[i])[1]) > tol)
      throw MeshError(MeshError::Kind::periodic_mismatch,
                      "lateral node " + std::to_string(right[i]) + " has no partner at the same height");
    out.node_pairs.push_back({left[i], right[i]});
  }
  return out;
}

}  // namespace osc
