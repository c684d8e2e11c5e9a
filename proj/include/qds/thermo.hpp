#pragma once

#include <string>
#include <vector>

#include "qds/records.hpp"

namespace qds {

/// Formation energy as an affine function of the Fermi level:
/// E_form(E_F) = intercept + q * E_F.
struct FormationLine {
    std::string defect_id;
    int charge = 0;
    double intercept = 0.0;  // eV at E_F = 0 (VBM)
};

/// Fermi-level interval over which one charge state owns the lowest
/// formation energy. Both bounds lie inside [0, E_g].
struct StabilityWindow {
    int charge = 0;
    double fermi_lo = 0.0;
    double fermi_hi = 0.0;

    double width() const { return fermi_hi - fermi_lo; }
};

struct ChargeTransitionLevel {
    int q_upper = 0;
    int q_lower = 0;
    double level = 0.0;  // eV above VBM, reported as-is (may fall outside the gap)

    std::string label() const;
};

/// E_form[X^q](E_F) per the standard charged-defect bookkeeping. `correction`
/// is the total finite-size term (scheme value plus any precomputed extra).
/// The VBM is the energy zero, so the charge term is q * fermi_level.
double formation_energy(const DefectRecord& rec, const HostSpec& host,
                        const ChemPotSet& chempots, double fermi_level,
                        double correction);

/// Formation line for a record (intercept evaluated at E_F = 0).
FormationLine formation_line(const DefectRecord& rec, const HostSpec& host,
                             const ChemPotSet& chempots, double correction);

/// Isotropic point-charge (Madelung) estimate of the spurious electrostatic
/// interaction of a charged defect with its periodic images:
///   E = alpha_M q^2 e^2/(4 pi eps0) / (2 eps L),  L = V^(1/3).
/// Only cubic supercells are supported with scheme=point_charge.
double finite_size_correction(int charge, const HostSpec& host, CorrectionScheme scheme);

/// Total correction for a record: its scheme evaluated on the host plus the
/// record's precomputed extra term.
double correction_for(const DefectRecord& rec, const HostSpec& host);

/// Madelung constant of a cubic lattice of point charges in a neutralizing
/// background, by Ewald summation (dimensionless; ~2.8373 for simple cubic).
double madelung_constant_cubic();

ChargeTransitionLevel charge_transition_level(const FormationLine& a, const FormationLine& b);

/// Lower envelope of the formation lines over [0, E_g]. Charges that never
/// own the envelope are absent; windows narrower than 1e-6 eV are dropped.
std::vector<StabilityWindow> stability_windows(const std::vector<FormationLine>& lines,
                                               const HostSpec& host);

}  // namespace qds
