#pragma once

// Simplicial meshes (1D segments, 2D triangles) for two-phase organic
// devices: region labels, contact tags, donor/acceptor interface extraction
// and lateral periodic pairing.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace osc {

enum class Region : std::uint8_t { donor, acceptor, slab_donor, slab_acceptor };
enum class BoundaryTag : std::uint8_t { cathode, anode, lateral_left, lateral_right };

/// Donor material, including the donor half of the microscale slab.
constexpr bool is_donor_side(Region r) { return r == Region::donor || r == Region::slab_donor; }
constexpr bool is_acceptor_side(Region r) { return r == Region::acceptor || r == Region::slab_acceptor; }
constexpr bool is_slab(Region r) { return r == Region::slab_donor || r == Region::slab_acceptor; }

std::string_view to_string(Region r);
std::string_view to_string(BoundaryTag t);
std::optional<Region> parse_region(std::string_view s);
std::optional<BoundaryTag> parse_boundary_tag(std::string_view s);

class MeshError : public std::runtime_error {
 public:
  enum class Kind { parse, non_conformal, unknown_label, invalid_geometry, refinement_required,
                    empty_interface, self_intersecting, periodic_mismatch };
  MeshError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

using Point = std::array<double, 2>;  // y is unused for 1D meshes

/// Boundary facet: a node (1D) or an edge (2D).
struct BoundaryFacet {
  std::array<int, 2> nodes{-1, -1};
  BoundaryTag tag = BoundaryTag::cathode;
};

/// P1 element geometry: measure and gradients of the barycentric functions.
struct ElementGeometry {
  double measure = 0.0;
  std::array<std::array<double, 2>, 3> grad{};  // grad[i] = ∇λ_i
  int n_vertices = 0;
};

/// Validated, immutable simplicial mesh. Construct through Mesh::create or a builder.
class Mesh {
 public:
  static Mesh create(int dimension, std::vector<Point> nodes, std::vector<std::array<int, 3>> elements,
                     std::vector<Region> regions, std::vector<BoundaryFacet> boundary);

  int dimension() const { return dim_; }
  int vertices_per_element() const { return dim_ + 1; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_elements() const { return elements_.size(); }

  const std::vector<Point>& nodes() const { return nodes_; }
  const Point& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<std::array<int, 3>>& elements() const { return elements_; }
  const std::array<int, 3>& element(std::size_t k) const { return elements_[k]; }
  Region region(std::size_t k) const { return regions_[k]; }
  const std::vector<Region>& regions() const { return regions_; }
  const std::vector<BoundaryFacet>& boundary_facets() const { return boundary_; }
  const ElementGeometry& geometry(std::size_t k) const { return geometry_[k]; }

  /// Sorted, unique node indices lying on facets with the given tag.
  std::vector<int> boundary_nodes(BoundaryTag tag) const;
  /// Total measure of the facets with the given tag (1 per node in 1D).
  double boundary_measure(BoundaryTag tag) const;
  double total_measure() const;
  double measure_of(bool (*pred)(Region)) const;
  /// Bounding-box diagonal, used as the length scale for tolerances.
  double length_scale() const;

 private:
  Mesh() = default;
  int dim_ = 1;
  std::vector<Point> nodes_;
  std::vector<std::array<int, 3>> elements_;
  std::vector<Region> regions_;
  std::vector<BoundaryFacet> boundary_;
  std::vector<ElementGeometry> geometry_;
};

struct InterfaceFacet {
  std::array<int, 2> nodes{-1, -1};  // second entry unused in 1D
  double measure = 0.0;              // 1 for the 1D point interface
  Point normal{0.0, 0.0};            // unit, donor -> acceptor
  int donor_element = -1;
  int acceptor_element = -1;
};

struct InterfaceSet {
  std::vector<InterfaceFacet> facets;
  std::vector<int> nodes;  // sorted global node indices on the interface
};

struct PeriodicPairing {
  std::vector<std::array<int, 2>> node_pairs;  // {left (master), right (slave)}
};

/// Uniform-per-segment line mesh on [0, length]. Donor lies below the interface
/// (anode at x = 0), acceptor above (cathode at x = length). When `slab_half_width`
/// is given, the slab [x_I - H, x_I + H] is meshed explicitly and labelled
/// slab_donor / slab_acceptor with at least `min_elements_per_subslab` elements per side.
Mesh build_line_mesh(double length, int n_elements, double interface_position,
                     std::optional<double> slab_half_width = std::nullopt, int min_elements_per_subslab = 2);

struct RodGeometry {
  double cell_length = 150e-9;       // L_cell, electrode separation (y)
  double electrode_length = 50e-9;   // L_elec, lateral period (x)
  double rod_length = 79e-9;         // L_R
  double rod_width = 6.25e-9;        // W_R, donor rod width measured horizontally
  int n_rods = 4;                    // donor rods per period; 0 gives the biplanar device
  double incidence_angle_deg = 90.0; // rod side inclination w.r.t. the base
  double target_h = 1.5e-9;
};

/// Structured triangulation of the interpenetrating-rod device. The anode is at
/// y = 0 (donor below), the cathode at y = cell_length. For angles below 90° the
/// rods are sheared into parallelograms with horizontal width kept at rod_width.
Mesh build_rod_mesh(const RodGeometry& g);

/// Analytic length of the rod interface polyline per lateral period.
double rod_interface_length(const RodGeometry& g);

struct MorphologyGeometry {
  double side = 150e-9;
  int cells = 60;                       // pixels per side
  unsigned seed = 7;
  double target_interface_length = 900e-9;
  double blend_layer = 0.1;             // fraction of the height kept pure at each contact
};

/// Square device with a tortuous pixel-staircase interface generated from a
/// seeded periodic random field; the field amplitude is bisected so that the
/// interface length approaches target_interface_length. Islands disconnected
/// from their own contact are absorbed into the surrounding phase.
Mesh build_morphology_mesh(const MorphologyGeometry& g);

/// Text mesh format: `oscmesh <dim> <n_nodes> <n_elements> <n_boundary_facets>`
/// followed by node, element and boundary lines. Indices are zero-based.
Mesh load_triangle_mesh(std::istream& in);
void write_mesh(std::ostream& out, const Mesh& mesh);

InterfaceSet extract_interface(const Mesh& mesh);
double interface_length(const InterfaceSet& iface);
PeriodicPairing pair_periodic(const Mesh& mesh);

}  // namespace osc
