#pragma once

#include <optional>
#include <vector>

#include "qds/phonon.hpp"

namespace qds {

struct LineshapeGrid {
    double e_min = 0.0;   // eV; defaults derived from the ZPL when unset
    double e_max = 0.0;   // eV
    double step = 5e-5;   // eV (0.05 meV)
    bool explicit_range = false;
};

/// Zero-temperature emission lineshape. `intensity` is normalized to unit
/// integral over the grid; the ZPL sits at `zpl_position` and carries the
/// analytic weight exp(-S_total).
struct LineshapeResult {
    std::vector<double> energies;   // eV
    std::vector<double> intensity;  // 1/eV
    double zpl_position = 0.0;      // eV
    double zpl_weight = 0.0;        // fraction
    double broadening = 2.0;        // meV (Gaussian sigma)
    double s_total = 0.0;
};

/// Generating-function evaluation of the phonon-sideband emission spectrum:
/// S~(t) = sum_k S_k e^{-i w_k t},  G(t) = exp(S~(t) - S),
/// A(E) = FT[G * gaussian damping],  L(hw) ~ (hw)^3 A(zpl - hw).
LineshapeResult pl_lineshape(const HuangRhysDecomposition& hr, const PhononSet& phonons,
                             double zpl_ev, double broadening_mev = 2.0,
                             const LineshapeGrid& grid = {});

}  // namespace qds
