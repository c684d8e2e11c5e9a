#pragma once

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qds/records.hpp"

namespace qds {

enum class LifetimeConvention { as_printed, einstein };

std::string to_string(LifetimeConvention c);
LifetimeConvention parse_lifetime_convention(const std::string& s);

/// Expectation values of a refined Hamiltonian on fixed base-theory states,
/// without re-diagonalization. Eigenvalues come back sorted; band_indices in
/// the result map each slot to the original band.
struct SingleShotLevels {
    EnergyLevelSet levels;  // sorted, band_indices filled
};

SingleShotLevels single_shot_levels(const std::vector<PlaneWaveState>& base_states,
                                    const Eigen::MatrixXcd& reference_hamiltonian);

/// S = |sum f_up - sum f_dn| / 2 from raw (possibly fractional) occupations.
double total_spin(const std::map<Spin, std::vector<double>>& occupations);

/// Aufbau-refill variant: distributes the same electron counts over the
/// corrected levels from the bottom up, maximizing spin alignment per channel
/// is NOT attempted; each channel keeps its own electron count.
double total_spin_aufbau(const std::map<Spin, std::vector<double>>& occupations);

struct TransitionDipole {
    std::array<std::complex<double>, 3> components;  // Debye
    double magnitude = 0.0;                          // Debye
};

/// mu = (i hbar / ((e_f - e_i) m)) <psi_f|p|psi_i> evaluated on the shared
/// plane-wave basis. Throws on a degenerate pair (|e_f - e_i| <= 1e-6 eV);
/// callers needing degenerate subspaces combine magnitudes themselves.
TransitionDipole transition_dipole(const PlaneWaveState& psi_i, const PlaneWaveState& psi_f);

/// Real-space sampling context for IPR evaluation.
struct IprContext {
    Vec3 cell_lengths{1.0, 1.0, 1.0};     // Angstrom per axis
    int grid_points_per_axis = 64;
    double localization_threshold = 10.0;  // localized iff IPR * N_grid >= threshold

    int n_grid(int dimensions) const;
};

/// IPR = sum_i p_i^2 over grid cells, p_i = |psi(r_i)|^2 dV normalized to 1.
double ipr(const PlaneWaveState& state, const IprContext& ctx);

/// IPR of an explicit probability distribution (already normalized weights).
double ipr_of_probabilities(const std::vector<double>& p);

TransitionNature classify_transition(double initial_ipr, double final_ipr, int n_grid,
                                     double localization_threshold);

struct BandRef {
    Spin spin = Spin::up;
    int band_index = 0;
};

struct TransitionCandidate {
    BandRef initial;
    BandRef final_state;
    double delta_ks = 0.0;       // eV, from the corrected levels
    TransitionDipole dipole;     // of the exact pair
    double tdm = 0.0;            // Debye; RSS over degenerate subspaces
    double initial_ipr = 0.0;
    double final_ipr = 0.0;
    TransitionNature nature = TransitionNature::intra_defect;
    Spin spin_channel = Spin::up;
};

/// One spin channel of corrected levels with aligned occupations.
struct LevelScheme {
    EnergyLevelSet levels;
    std::vector<double> occupations;
};

/// Within each spin channel, finds the minimum occupied->unoccupied gap and
/// returns every pair within `window_ev` of it, TDM and localization included.
/// Occupied means f > 0.5, unoccupied f < 0.5, with a rejection band
/// (0.25, 0.75) for ambiguous data. Pairs where both states are delocalized
/// are dropped; if nothing remains the record has no defect character.
std::vector<TransitionCandidate> enumerate_transitions(
    const std::map<Spin, LevelScheme>& channels, const WavefunctionSet& wavefunctions,
    double window_ev, const IprContext& ipr_ctx);

/// Largest-TDM candidate (ties: smaller delta_ks, then band indices).
const TransitionCandidate* representative_transition(
    const std::vector<TransitionCandidate>& candidates);

struct LifetimeResult {
    bool dark = false;       // zero TDM, infinite lifetime
    double seconds = 0.0;    // undefined when dark
    LifetimeConvention convention = LifetimeConvention::as_printed;
};

/// Radiative lifetime of a transition of energy E and dipole mu in a medium
/// of refractive index n_r. `as_printed` uses
///   1/tau = n_r (2 pi)^3 nu^3 |mu|^2 / (3 eps0 h c^3),  nu = E/h;
/// `einstein` is the standard spontaneous-emission coefficient, twice that.
LifetimeResult radiative_lifetime(double energy_ev, double tdm_debye, double refractive_index,
                                  LifetimeConvention convention);

/// ZPL = excited - ground; both totals from relaxed configurations.
double zero_phonon_line(double ground_total_ev, double excited_total_ev);

enum class ExcitonKind { donor, acceptor };

std::string to_string(ExcitonKind k);

/// Energy margin (meV) against the bound exciton dissociating:
/// donor: E_g - ctl - zpl; acceptor: ctl - zpl. Positive = stable.
double bound_exciton_stability(double zpl_ev, double ctl_ev, const HostSpec& host,
                               ExcitonKind kind);

struct ExcitonAssessment {
    double zpl = 0.0;  // eV
    double ctl = 0.0;  // eV
    std::string ctl_label;
    ExcitonKind kind = ExcitonKind::donor;
    double bes = 0.0;  // meV
};

}  // namespace qds
