#pragma once

#include <array>
#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qds {

using Vec3 = std::array<double, 3>;

enum class Spin { up, down };
enum class Site { substitutional, tet_interstitial, hex_interstitial };
enum class LevelStage { base, corrected };
enum class TransitionStage { screening, refined };
enum class TransitionNature { donor_bx, acceptor_bx, intra_defect };
enum class CorrectionScheme { none, point_charge };

std::string to_string(Spin s);
std::string to_string(Site s);
std::string to_string(LevelStage s);
std::string to_string(TransitionStage s);
std::string to_string(TransitionNature n);
std::string to_string(CorrectionScheme s);

Spin parse_spin(const std::string& s);
Site parse_site(const std::string& s);
LevelStage parse_level_stage(const std::string& s);
TransitionStage parse_transition_stage(const std::string& s);
TransitionNature parse_transition_nature(const std::string& s);
CorrectionScheme parse_correction_scheme(const std::string& s);

/// Eigenvalues of one spin channel at a single k-point, in eV referenced to
/// the host VBM. `band_indices` records the original band order when the set
/// was produced by a reordering operation; empty means identity.
struct EnergyLevelSet {
    std::vector<double> eigenvalues;
    std::string kpoint = "Gamma";
    std::vector<int> band_indices;

    friend bool operator==(const EnergyLevelSet&, const EnergyLevelSet&) = default;
};

/// One Kohn-Sham-like state expanded on a plane-wave basis shared per record.
/// Basis vectors are in units of 2*pi/Angstrom.
struct PlaneWaveState {
    std::shared_ptr<const std::vector<Vec3>> basis;
    std::vector<std::complex<double>> coefficients;
    double eigenvalue = 0.0;  // eV
    Spin spin = Spin::up;
    int band_index = 0;
};
bool operator==(const PlaneWaveState& a, const PlaneWaveState& b);

struct WavefunctionSet {
    std::shared_ptr<const std::vector<Vec3>> basis;
    std::vector<PlaneWaveState> states;  // sorted by (spin, band_index)

    const PlaneWaveState* find(Spin spin, int band) const;
};
bool operator==(const WavefunctionSet& a, const WavefunctionSet& b);

/// Precomputed transition data carried by a record (for ingested datasets the
/// screening/refined values are data, not something the engine can recompute).
struct TransitionMetadata {
    TransitionStage stage = TransitionStage::screening;
    Spin spin = Spin::up;
    double delta_ks = 0.0;  // eV
    double tdm = 0.0;       // Debye
    TransitionNature nature = TransitionNature::intra_defect;
    std::optional<double> initial_ipr;
    std::optional<double> final_ipr;

    friend bool operator==(const TransitionMetadata&, const TransitionMetadata&) = default;
};

/// Dense symmetric matrix stored row-major; used for force constants.
struct SymmetricMatrix {
    int dim = 0;
    std::vector<double> values;

    double at(int i, int j) const { return values[static_cast<size_t>(i) * dim + j]; }
    friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;
};

/// Per-atom ground->excited displacement with matching masses.
struct DisplacementField {
    std::vector<Vec3> delta_r;   // Angstrom
    std::vector<double> masses;  // amu

    friend bool operator==(const DisplacementField&, const DisplacementField&) = default;
};

struct CorrectionSpec {
    CorrectionScheme scheme = CorrectionScheme::none;
    double extra = 0.0;  // eV, precomputed alignment/shape terms

    friend bool operator==(const CorrectionSpec&, const CorrectionSpec&) = default;
};

/// One charged defect calculation.
struct DefectRecord {
    std::string element;
    Site site = Site::substitutional;
    int charge = 0;
    int supercell_atoms = 0;
    double total_energy = 0.0;  // eV
    std::map<LevelStage, std::map<Spin, EnergyLevelSet>> level_sets;
    std::map<Spin, std::vector<double>> occupations;
    std::optional<WavefunctionSet> wavefunctions;
    std::optional<double> zpl_override;           // eV
    std::optional<double> excited_total_energy;   // eV
    std::optional<DisplacementField> displacement_vector;
    std::optional<SymmetricMatrix> force_constants;  // eV/A^2
    std::vector<TransitionMetadata> transitions;
    std::optional<double> bes_override;      // meV
    std::optional<double> hr_total_override;  // dimensionless
    CorrectionSpec correction;
    std::string provenance;

    std::string defect_id() const;
    /// Grouping key for thermodynamics: element + site.
    std::string identity() const;
    /// Largest-TDM metadata entry for a stage, or nullptr.
    const TransitionMetadata* transition(TransitionStage stage) const;
};
bool operator==(const DefectRecord& a, const DefectRecord& b);

/// Host-material constants. Energies in eV, lengths in Angstrom.
struct HostSpec {
    double band_gap = 0.0;
    double vbm_reference = 0.0;
    double refractive_index = 1.0;
    double dielectric_constant = 1.0;
    std::array<Vec3, 3> lattice_vectors{};
    double bulk_total_energy_per_supercell = 0.0;
    std::string host_element = "Si";

    double volume() const;
    /// True when the three lattice vectors form a cube (orthogonal, equal length).
    bool is_cubic(double tol = 1e-8) const;
    void validate() const;

    friend bool operator==(const HostSpec&, const HostSpec&) = default;
};

struct ChemPotSet {
    std::string label;
    std::map<std::string, double> chemical_potentials;  // element -> eV

    double mu_for(const std::string& element) const;

    friend bool operator==(const ChemPotSet&, const ChemPotSet&) = default;
};

std::string canonical_defect_id(const std::string& element, Site site, int charge);

DefectRecord parse_record(const std::string& text);
std::string serialize_record(const DefectRecord& rec);

HostSpec parse_host(const std::string& text);
std::string serialize_host(const HostSpec& host);

ChemPotSet parse_chempots(const std::string& text);
std::string serialize_chempots(const ChemPotSet& chempots);

}  // namespace qds
