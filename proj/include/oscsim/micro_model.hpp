#pragma once

// 1D heterogeneous model with an explicitly meshed slab around the interface:
// volumetric polaron density P on the slab, electrons on acceptor + slab,
// holes on donor + slab.

#include "oscsim/macro_model.hpp"

namespace osc {

class MicroModel : public DeviceProblem {
 public:
  /// Throws std::invalid_argument when the mesh has no slab elements or is not 1D.
  MicroModel(Mesh mesh, const DeviceParams& params);

  /// Slab measure (2H in 1D).
  double slab_measure() const;

 protected:
  void assemble(const Vector& y, const TimeDiscretization& td, Accumulator& acc) override;

 private:
  std::vector<int> slab_elems_;
};

}  // namespace osc
