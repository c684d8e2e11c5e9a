#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "qds/records.hpp"

namespace qds {

/// Harmonic modes of a finite cluster or periodic cell. Frequencies are
/// hbar*omega in meV, sorted ascending; imaginary modes carry a negative
/// sign. Eigenvectors are mass-weighted and orthonormal, one column per mode.
struct PhononSet {
    std::vector<double> frequencies;  // meV
    Eigen::MatrixXd eigenvectors;     // 3N x n_modes
    std::vector<double> masses;       // amu, per atom

    int n_atoms() const { return static_cast<int>(masses.size()); }
};

struct PhononOptions {
    /// Project rigid translations out of the dynamical matrix (acoustic sum
    /// rule). Disable for systems pinned by an external potential.
    bool project_translations = true;
    /// Modes more imaginary than this are rejected.
    double imaginary_tolerance_mev = 1.0;
};

/// Diagonalize D = Phi_{a alpha, b beta} / sqrt(m_a m_b).
PhononSet phonon_modes(const Eigen::MatrixXd& force_constants_ev_a2,
                       const std::vector<double>& masses_amu,
                       const PhononOptions& options = {});

struct BallSpringStructure {
    std::vector<Vec3> positions;  // Angstrom, equilibrium
    std::vector<double> masses;   // amu
};

/// Forces (eV/A) on every atom for the given positions.
using ForceProvider = std::function<std::vector<Vec3>(const std::vector<Vec3>&)>;

/// Central-difference force constants: displace every (atom, axis) by
/// +/- displacement, symmetrize, impose the acoustic sum rule.
Eigen::MatrixXd finite_displacement_force_constants(const ForceProvider& forces,
                                                    const BallSpringStructure& structure,
                                                    double displacement_a = 0.01);

/// Partial Huang-Rhys factors in the equal-mode approximation:
/// q_k = sum_a sqrt(m_a) dR_a . e_{k,a},  S_k = omega_k q_k^2 / (2 hbar).
struct HuangRhysDecomposition {
    std::vector<double> partial_factors;  // aligned with PhononSet modes
    double total = 0.0;
};

HuangRhysDecomposition partial_hr_factors(const PhononSet& phonons,
                                          const std::vector<Vec3>& delta_r_a,
                                          const std::vector<double>& masses_amu);

/// Gaussian-smeared spectral density S(hbar w) = sum_k S_k g_sigma(hw - hw_k),
/// sampled on `energies_mev`. Integrates to S_total.
std::vector<double> spectral_density(const HuangRhysDecomposition& hr,
                                     const PhononSet& phonons, double sigma_mev,
                                     const std::vector<double>& energies_mev);

}  // namespace qds
