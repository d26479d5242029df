#pragma once

#include <cstdint>

#include "qgeom/subgeometry.hpp"

namespace qgeom {

/// Two-level Bloch model on the (theta, phi) chart: flat connection, h = I,
/// P = |psi><psi| with psi = (cos theta/2, e^{i phi} sin theta/2).
CVector bloch_state(double theta, double phi);
ProjectorField bloch_projector(double step = 0.02);
/// Frame field in the gauge of bloch_state (and its orthogonal partner).
FrameField bloch_state_frame(const ProjectorField& pf);

struct RandomModelOptions {
  int n = 3;          // fiber rank
  int m = 1;          // projector rank
  int dim = 2;        // chart dimension
  int negative = 0;   // number of negative directions of the fiber pairing
  double scale = 0.3; // size of the random generators
  double step = 0.01;
};

/// Seeded random bundle with a position-dependent pseudo-metric, a compatible
/// non-flat connection and an h-compatible projector. Built in a frame where h
/// is constant and then moved by an affine change of frame T(x), so
/// compatibility holds exactly.
ProjectorField random_projector_model(std::uint64_t seed, const RandomModelOptions& opts = {});

}  // namespace qgeom
