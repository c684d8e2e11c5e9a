#include "qds/thermo.hpp"

#include <algorithm>
#include <cmath>

#include "qds/error.hpp"
#include "qds/units.hpp"

namespace qds {

namespace {

constexpr double kMinWindowWidth = 1e-6;  // eV, below numerical meaning

// Number of atoms exchanged with the reservoirs: +1 impurity always, -1 host
// atom when the impurity replaces one.
double reservoir_term(const DefectRecord& rec, const HostSpec& host,
                      const ChemPotSet& chempots) {
    double sum = chempots.mu_for(rec.element);
    if (rec.site == Site::substitutional) {
        sum -= chempots.mu_for(host.host_element);
    }
    return sum;
}

}  // namespace

std::string ChargeTransitionLevel::label() const {
    auto fmt = [](int q) {
        return q > 0 ? "+" + std::to_string(q) : std::to_string(q);
    };
    return "(" + fmt(q_upper) + "/" + fmt(q_lower) + ")";
}

double formation_energy(const DefectRecord& rec, const HostSpec& host,
                        const ChemPotSet& chempots, double fermi_level,
                        double correction) {
    if (fermi_level < 0.0 || fermi_level > host.band_gap) {
        throw ValidationError("fermi_level outside the gap [0, " +
                              std::to_string(host.band_gap) + "]");
    }
    return rec.total_energy - host.bulk_total_energy_per_supercell -
           reservoir_term(rec, host, chempots) + rec.charge * fermi_level + correction;
}

FormationLine formation_line(const DefectRecord& rec, const HostSpec& host,
                             const ChemPotSet& chempots, double correction) {
    FormationLine line;
    line.defect_id = rec.defect_id();
    line.charge = rec.charge;
    line.intercept = formation_energy(rec, host, chempots, 0.0, correction);
    return line;
}

double madelung_constant_cubic() {
    // Ewald sum for the self-potential of a unit point charge in a cubic
    // lattice (L = 1) with uniform neutralizing background, split parameter
    // kappa = sqrt(pi). Eight shells converge the value far below 1e-12.
    static const double alpha = [] {
        const double kappa = std::sqrt(kPi);
        const int nmax = 8;
        double real_sum = 0.0;
        double recip_sum = 0.0;
        for (int i = -nmax; i <= nmax; ++i) {
            for (int j = -nmax; j <= nmax; ++j) {
                for (int k = -nmax; k <= nmax; ++k) {
                    if (i == 0 && j == 0 && k == 0) {
                        continue;
                    }
                    double n2 = double(i) * i + double(j) * j + double(k) * k;
                    double r = std::sqrt(n2);
                    real_sum += std::erfc(kappa * r) / r;
                    recip_sum += std::exp(-kPi * n2) / (kPi * n2);
                }
            }
        }
        double v = real_sum + recip_sum - 2.0 * kappa / std::sqrt(kPi) - kPi / (kappa * kappa);
        return -v;
    }();
    return alpha;
}

double finite_size_correction(int charge, const HostSpec& host, CorrectionScheme scheme) {
    if (scheme == CorrectionScheme::none || charge == 0) {
        return 0.0;
    }
    if (!host.is_cubic()) {
        throw ValidationError(
            "point_charge correction supports only cubic supercells in v1");
    }
    double cell_length = std::cbrt(host.volume());
    return madelung_constant_cubic() * charge * charge *
           kUnits.coulomb_constant_ev_angstrom /
           (2.0 * host.dielectric_constant * cell_length);
}

double correction_for(const DefectRecord& rec, const HostSpec& host) {
    return finite_size_correction(rec.charge, host, rec.correction.scheme) +
           rec.correction.extra;
}

ChargeTransitionLevel charge_transition_level(const FormationLine& a,
                                              const FormationLine& b) {
    if (a.charge == b.charge) {
        throw ValidationError("charge transition level requires distinct charges");
    }
    const FormationLine& hi = a.charge > b.charge ? a : b;
    const FormationLine& lo = a.charge > b.charge ? b : a;
    ChargeTransitionLevel ctl;
    ctl.q_upper = hi.charge;
    ctl.q_lower = lo.charge;
    ctl.level = (lo.intercept - hi.intercept) / (hi.charge - lo.charge);
    if (!std::isfinite(ctl.level)) {
        throw ValidationError("charge transition level is not finite");
    }
    return ctl;
}

std::vector<StabilityWindow> stability_windows(const std::vector<FormationLine>& lines,
                                               const HostSpec& host) {
    if (lines.empty()) {
        throw ValidationError("stability_windows requires at least one formation line");
    }
    const double eg = host.band_gap;

    // Breakpoint candidates: gap edges plus every pairwise intersection.
    std::vector<double> breaks{0.0, eg};
    for (size_t i = 0; i < lines.size(); ++i) {
        for (size_t j = i + 1; j < lines.size(); ++j) {
            if (lines[i].charge == lines[j].charge) {
                continue;
            }
            double x = (lines[j].intercept - lines[i].intercept) /
                       (lines[i].charge - lines[j].charge);
            if (x > 0.0 && x < eg) {
                breaks.push_back(x);
            }
        }
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 breaks.end());

    // Winner of each sub-interval, ties broken toward lower |q| then higher q
    // so reports are deterministic.
    auto winner_at = [&](double ef) {
        const FormationLine* best = nullptr;
        for (const auto& line : lines) {
            double e = line.intercept + line.charge * ef;
            if (!best) {
                best = &line;
                continue;
            }
            double eb = best->intercept + best->charge * ef;
            if (e < eb - 1e-12) {
                best = &line;
            } else if (std::abs(e - eb) <= 1e-12) {
                if (std::abs(line.charge) < std::abs(best->charge) ||
                    (std::abs(line.charge) == std::abs(best->charge) &&
                     line.charge > best->charge)) {
                    best = &line;
                }
            }
        }
        return best;
    };

    std::vector<StabilityWindow> windows;
    for (size_t i = 0; i + 1 < breaks.size(); ++i) {
        double lo = breaks[i];
        double hi = breaks[i + 1];
        const FormationLine* win = winner_at(0.5 * (lo + hi));
        if (!windows.empty() && windows.back().charge == win->charge &&
            std::abs(windows.back().fermi_hi - lo) < 1e-12) {
            windows.back().fermi_hi = hi;
        } else {
            windows.push_back({win->charge, lo, hi});
        }
    }
    windows.erase(std::remove_if(windows.begin(), windows.end(),
                                 [](const StabilityWindow& w) {
                                     return w.width() < kMinWindowWidth;
                                 }),
                  windows.end());
    return windows;
}

}  // namespace qds
