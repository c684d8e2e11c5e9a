#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qds/phonon.hpp"
#include "qds/records.hpp"

namespace qds {

enum class WellStage { base, refined };
enum class CcOccupation { ground, promoted };

/// Periodic Gaussian-well model: a deliberately small stand-in for a defect
/// supercell. The refined Hamiltonian deepens the well by `refined_scale`,
/// mimicking a higher level of theory applied on fixed base wavefunctions.
struct WellModelSpec {
    int dimension = 1;                      // 1 or 3
    double cell_length = 20.0;              // Angstrom
    int basis_cutoff = 12;                  // max |G| index per axis
    double effective_mass = 1.0;            // units of m_e
    double host_potential_amplitude = 0.0;  // eV
    double defect_depth = 4.0;              // eV
    double defect_width = 0.5;              // Angstrom
    double refined_scale = 1.0;             // in [0.5, 2]
    int electrons_up = 1;
    int electrons_down = 0;

    void validate() const;
};

/// Harmonic lattice coordinate coupled linearly to the defect depth:
/// depth(Q) = defect_depth + coupling * Q, restoring energy k Q^2 / 2.
/// The coordinate is carried by a two-atom dimer (relative displacement Q).
struct ConfigCoordSpec {
    double spring_k = 2.0;     // eV/A^2
    double coupling = 0.05;    // eV/A
    WellModelSpec base;
    double mode_mass = 28.0;   // amu per dimer atom
    double transverse_k = 1.0; // eV/A^2, keeps the dimer's y/z modes finite

    void validate() const;
};

struct WellSolution {
    std::vector<PlaneWaveState> states;  // sorted by eigenvalue, spin tag = up
    EnergyLevelSet levels;
    std::shared_ptr<const std::vector<Vec3>> basis;
};

std::shared_ptr<const std::vector<Vec3>> well_basis(const WellModelSpec& spec);

/// Plane-wave Hamiltonian H(G,G') = hbar^2 |G|^2 delta / (2 m*) + V(G - G')
/// with the analytic Gaussian-well Fourier transform.
Eigen::MatrixXd well_hamiltonian(const WellModelSpec& spec, WellStage stage);

/// Diagonalizes the well Hamiltonian. With `check_convergence` the ground
/// state is compared against a cutoff+2 solve and must agree within 1 meV.
WellSolution solve_well(const WellModelSpec& spec, WellStage stage,
                        bool check_convergence = true);

struct RelaxResult {
    double q_star = 0.0;        // Angstrom
    double total_energy = 0.0;  // eV, electronic sum + elastic term
};

/// Total energy E(Q) = sum_occupied eps_i(Q) + k Q^2 / 2, minimized over the
/// configuration coordinate (golden section to 1e-6 A, then derivative
/// polish). `promoted` moves one electron HOMO -> LUMO (constrained
/// occupation); the LUMO must be a bound level.
RelaxResult relax_and_excite(const ConfigCoordSpec& spec, CcOccupation occupation);

/// Electronic energy at fixed Q for the given occupation (no elastic term).
double cc_electronic_energy(const ConfigCoordSpec& spec, double q, CcOccupation occupation);

// Ball-spring helpers shared by the phonon oracles and the corpus generator.
BallSpringStructure dimer_structure(double mass_amu, double bond_length_a = 2.0);
Eigen::MatrixXd dimer_force_constants(double k_rel, double k_trans);
/// Periodic 1D chain with longitudinal and transverse nearest-neighbor
/// springs; the analytic dispersion is 2 sqrt(k/m) |sin(q a / 2)|.
BallSpringStructure chain_structure(int n_atoms, double mass_amu, double spacing_a = 2.5);
Eigen::MatrixXd chain_force_constants(int n_atoms, double k_long, double k_trans);
/// Forces F = -Phi u for displacements u from the equilibrium structure.
ForceProvider harmonic_force_provider(Eigen::MatrixXd phi, BallSpringStructure equilibrium);

/// One corpus entry: a labeled model defect, optionally with a configuration
/// coordinate, emitted in one or more charge states (charge counts electrons
/// removed from the spec's filling).
struct CorpusEntry {
    std::string element = "Fe";
    Site site = Site::tet_interstitial;
    WellModelSpec well;
    std::optional<ConfigCoordSpec> config_coord;
    std::vector<int> emit_charges = {0};
};

struct ModelHostConfig {
    double band_gap = 1.2;          // eV
    double refractive_index = 3.8;
    double dielectric_constant = 11.7;
    double vbm_shift = 0.0;         // added to stored eigenvalues and totals
    std::string chempot_label = "model-reference";
};

struct GeneratedCorpus {
    HostSpec host;
    ChemPotSet chempots;
    std::vector<DefectRecord> records;
};

/// Emits schema-valid records: base + single-shot corrected level sets,
/// occupations, wavefunctions, and for configuration-coordinate entries the
/// excited totals, displacement vector and dimer force constants.
GeneratedCorpus generate_corpus(const std::vector<CorpusEntry>& entries,
                                const ModelHostConfig& host_config);

/// Deterministic randomized corpus entries for property tests and demos.
std::vector<CorpusEntry> randomized_entries(unsigned long long seed, int count);

}  // namespace qds
