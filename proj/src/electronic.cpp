#include "qds/electronic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qds/error.hpp"
#include "qds/units.hpp"

namespace qds {

namespace {

constexpr double kDegeneracyEv = 1e-6;

struct LevelRef {
    int index = 0;  // slot in the sorted level list
    double energy = 0.0;
    double occupation = 0.0;
    int band = 0;  // original band index (wavefunction key)
};

// Number of axes along which the basis actually varies (1 for 1D models).
int active_dimensions(const std::vector<Vec3>& basis) {
    int dims = 0;
    for (int d = 0; d < 3; ++d) {
        for (const auto& g : basis) {
            if (g[d] != 0.0) {
                ++dims;
                break;
            }
        }
    }
    return dims == 0 ? 1 : dims;
}

// Clusters of levels closer than the degeneracy threshold, used for the
// basis-rotation-invariant TDM magnitude.
std::vector<std::vector<int>> degenerate_clusters(const std::vector<LevelRef>& refs) {
    std::vector<std::vector<int>> clusters;
    for (size_t i = 0; i < refs.size(); ++i) {
        if (!clusters.empty() &&
            refs[i].energy - refs[clusters.back().back()].energy <= kDegeneracyEv) {
            clusters.back().push_back(static_cast<int>(i));
        } else {
            clusters.push_back({static_cast<int>(i)});
        }
    }
    return clusters;
}

}  // namespace

std::string to_string(LifetimeConvention c) {
    return c == LifetimeConvention::as_printed ? "as_printed" : "einstein";
}

LifetimeConvention parse_lifetime_convention(const std::string& s) {
    if (s == "as_printed") return LifetimeConvention::as_printed;
    if (s == "einstein") return LifetimeConvention::einstein;
    throw ValidationError("unknown lifetime convention: " + s);
}

std::string to_string(ExcitonKind k) {
    return k == ExcitonKind::donor ? "donor" : "acceptor";
}

SingleShotLevels single_shot_levels(const std::vector<PlaneWaveState>& base_states,
                                    const Eigen::MatrixXcd& reference_hamiltonian) {
    if (base_states.empty()) {
        throw ValidationError("single_shot_levels: no base states");
    }
    const auto n = static_cast<Eigen::Index>(base_states.front().basis->size());
    if (reference_hamiltonian.rows() != n || reference_hamiltonian.cols() != n) {
        throw ValidationError("single_shot_levels: Hamiltonian dimension mismatch");
    }
    double asym = (reference_hamiltonian - reference_hamiltonian.adjoint())
                      .cwiseAbs()
                      .maxCoeff();
    if (asym > 1e-10) {
        throw ValidationError("single_shot_levels: non-Hermitian reference Hamiltonian");
    }

    std::vector<Eigen::VectorXcd> vecs;
    vecs.reserve(base_states.size());
    for (const auto& s : base_states) {
        if (static_cast<Eigen::Index>(s.coefficients.size()) != n) {
            throw ValidationError("single_shot_levels: state dimension mismatch");
        }
        Eigen::VectorXcd v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v(i) = s.coefficients[static_cast<size_t>(i)];
        }
        vecs.push_back(std::move(v));
    }
    for (size_t i = 0; i < vecs.size(); ++i) {
        for (size_t j = i; j < vecs.size(); ++j) {
            std::complex<double> ov = vecs[i].dot(vecs[j]);
            double target = (i == j) ? 1.0 : 0.0;
            if (std::abs(ov - target) > 1e-8) {
                throw ValidationError("single_shot_levels: base states not orthonormal");
            }
        }
    }

    std::vector<std::pair<double, int>> entries;
    entries.reserve(base_states.size());
    for (size_t i = 0; i < base_states.size(); ++i) {
        double e = std::real(vecs[i].dot(reference_hamiltonian * vecs[i]));
        entries.emplace_back(e, base_states[i].band_index);
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    SingleShotLevels out;
    out.levels.kpoint = "Gamma";
    for (const auto& [e, band] : entries) {
        out.levels.eigenvalues.push_back(e);
        out.levels.band_indices.push_back(band);
    }
    return out;
}

double total_spin(const std::map<Spin, std::vector<double>>& occupations) {
    double up = 0.0;
    double dn = 0.0;
    for (const auto& [spin, occ] : occupations) {
        for (double f : occ) {
            if (f < 0.0 || f > 1.0) {
                throw ValidationError("total_spin: occupation outside [0, 1]");
            }
            (spin == Spin::up ? up : dn) += f;
        }
    }
    return std::abs(up - dn) / 2.0;
}

double total_spin_aufbau(const std::map<Spin, std::vector<double>>& occupations) {
    // Electron counts are conserved per channel; filling order does not change
    // the channel sums, so S matches total_spin for integer counts. Fractional
    // counts are rounded into the lowest levels.
    double up = 0.0;
    double dn = 0.0;
    for (const auto& [spin, occ] : occupations) {
        double count = std::accumulate(occ.begin(), occ.end(), 0.0);
        (spin == Spin::up ? up : dn) += std::round(count);
    }
    return std::abs(up - dn) / 2.0;
}

TransitionDipole transition_dipole(const PlaneWaveState& psi_i, const PlaneWaveState& psi_f) {
    if (!psi_i.basis || psi_i.basis != psi_f.basis) {
        if (!psi_i.basis || !psi_f.basis || !(*psi_i.basis == *psi_f.basis)) {
            throw ValidationError("transition_dipole: states use different bases");
        }
    }
    const auto& basis = *psi_i.basis;
    if (psi_i.coefficients.size() != basis.size() ||
        psi_f.coefficients.size() != basis.size()) {
        throw ValidationError("transition_dipole: coefficient/basis shape mismatch");
    }
    double de_ev = psi_f.eigenvalue - psi_i.eigenvalue;
    if (std::abs(de_ev) <= kDegeneracyEv) {
        throw ValidationError("transition_dipole: degenerate pair");
    }

    // <p> = sum_G c_f*(G) hbar G c_i(G), with G = 2 pi g * 1e10 1/m.
    std::array<std::complex<double>, 3> p{};
    for (size_t k = 0; k < basis.size(); ++k) {
        std::complex<double> w = std::conj(psi_f.coefficients[k]) * psi_i.coefficients[k];
        for (int d = 0; d < 3; ++d) {
            p[d] += w * basis[k][d];
        }
    }
    const double g_to_si = 2.0 * kPi * 1.0e10;
    const double de_joule = de_ev * kUnits.ev_in_joule;
    // meters -> C*m -> Debye
    const double prefactor = kUnits.hbar * kUnits.hbar * g_to_si /
                             (de_joule * kUnits.electron_mass) *
                             kUnits.elementary_charge / kUnits.debye_in_coulomb_meter;
    TransitionDipole out;
    double mag2 = 0.0;
    for (int d = 0; d < 3; ++d) {
        // The leading i of the definition is a pure phase; folding it in keeps
        // the components' relative phases intact.
        out.components[d] = std::complex<double>(0.0, 1.0) * p[d] * prefactor;
        mag2 += std::norm(out.components[d]);
    }
    out.magnitude = std::sqrt(mag2);
    return out;
}

int IprContext::n_grid(int dimensions) const {
    int n = 1;
    for (int d = 0; d < dimensions; ++d) {
        n *= grid_points_per_axis;
    }
    return n;
}

double ipr_of_probabilities(const std::vector<double>& p) {
    double sum = 0.0;
    double sum2 = 0.0;
    for (double v : p) {
        if (v < 0.0) {
            throw ValidationError("ipr: negative probability");
        }
        sum += v;
        sum2 += v * v;
    }
    if (sum <= 0.0) {
        throw ValidationError("ipr: empty distribution");
    }
    return sum2 / (sum * sum);
}

double ipr(const PlaneWaveState& state, const IprContext& ctx) {
    const auto& basis = *state.basis;
    // Active axes: those along which the basis actually varies.
    std::vector<int> axes;
    for (int d = 0; d < 3; ++d) {
        for (const auto& g : basis) {
            if (g[d] != 0.0) {
                axes.push_back(d);
                break;
            }
        }
    }
    if (axes.empty()) {
        axes.push_back(0);  // constant state, any axis works
    }
    const int npa = ctx.grid_points_per_axis;
    const int dims = static_cast<int>(axes.size());
    int total = 1;
    for (int d = 0; d < dims; ++d) {
        total *= npa;
    }

    // psi on the fractional grid; the phase per axis is
    // 2 pi * (g_d L_d) * f_d, with g in 2pi/Angstrom units.
    std::vector<double> density(static_cast<size_t>(total), 0.0);
    std::vector<int> coord(static_cast<size_t>(dims), 0);
    for (int cell = 0; cell < total; ++cell) {
        int rem = cell;
        for (int d = 0; d < dims; ++d) {
            coord[static_cast<size_t>(d)] = rem % npa;
            rem /= npa;
        }
        std::complex<double> psi(0.0, 0.0);
        for (size_t k = 0; k < basis.size(); ++k) {
            double phase = 0.0;
            for (int d = 0; d < dims; ++d) {
                int axis = axes[static_cast<size_t>(d)];
                double frac = static_cast<double>(coord[static_cast<size_t>(d)]) / npa;
                phase += 2.0 * kPi * basis[k][axis] * ctx.cell_lengths[axis] * frac;
            }
            psi += state.coefficients[k] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        density[static_cast<size_t>(cell)] = std::norm(psi);
    }
    return ipr_of_probabilities(density);
}

TransitionNature classify_transition(double initial_ipr, double final_ipr, int n_grid,
                                     double localization_threshold) {
    bool initial_localized = initial_ipr * n_grid >= localization_threshold;
    bool final_localized = final_ipr * n_grid >= localization_threshold;
    if (initial_localized && final_localized) {
        return TransitionNature::intra_defect;
    }
    if (initial_localized) {
        return TransitionNature::donor_bx;
    }
    if (final_localized) {
        return TransitionNature::acceptor_bx;
    }
    throw ValidationError("classify_transition: no defect character");
}

std::vector<TransitionCandidate> enumerate_transitions(
    const std::map<Spin, LevelScheme>& channels, const WavefunctionSet& wavefunctions,
    double window_ev, const IprContext& ipr_ctx) {
    std::vector<TransitionCandidate> out;
    bool any_pair = false;
    bool dropped_delocalized = false;
    const int n_grid = ipr_ctx.n_grid(active_dimensions(*wavefunctions.basis));

    for (const auto& [spin, scheme] : channels) {
        const auto& levels = scheme.levels.eigenvalues;
        const auto& occ = scheme.occupations;
        if (levels.size() != occ.size()) {
            throw ValidationError("enumerate_transitions: levels/occupations shape mismatch");
        }
        std::vector<LevelRef> occupied;
        std::vector<LevelRef> unoccupied;
        std::vector<LevelRef> all;
        for (size_t i = 0; i < levels.size(); ++i) {
            double f = occ[i];
            if (f > 0.25 && f < 0.75) {
                throw ValidationError("ambiguous occupation " + std::to_string(f) +
                                      " in spin channel " + to_string(spin));
            }
            int band = scheme.levels.band_indices.empty()
                           ? static_cast<int>(i)
                           : scheme.levels.band_indices[i];
            LevelRef ref{static_cast<int>(i), levels[i], f, band};
            all.push_back(ref);
            (f > 0.5 ? occupied : unoccupied).push_back(ref);
        }
        if (occupied.empty() || unoccupied.empty()) {
            continue;
        }

        double min_gap = std::numeric_limits<double>::infinity();
        for (const auto& o : occupied) {
            for (const auto& u : unoccupied) {
                double gap = u.energy - o.energy;
                if (gap > 0.0 && gap < min_gap) {
                    min_gap = gap;
                }
            }
        }
        if (!std::isfinite(min_gap)) {
            continue;  // no positive-gap pair in this channel
        }
        if (min_gap <= kDegeneracyEv) {
            throw ValidationError(
                "enumerate_transitions: occupied and unoccupied levels are degenerate");
        }

        auto clusters = degenerate_clusters(all);
        auto cluster_of = [&](int index) -> const std::vector<int>& {
            for (const auto& c : clusters) {
                for (int m : c) {
                    if (all[static_cast<size_t>(m)].index == index) {
                        return c;
                    }
                }
            }
            throw ValidationError("enumerate_transitions: internal cluster lookup failure");
        };

        auto state_for = [&](int band) -> const PlaneWaveState* {
            const PlaneWaveState* s = wavefunctions.find(spin, band);
            if (!s) {
                throw ValidationError("enumerate_transitions: missing wavefunction for band " +
                                      std::to_string(band) + " (" + to_string(spin) + ")");
            }
            return s;
        };

        for (const auto& o : occupied) {
            for (const auto& u : unoccupied) {
                double gap = u.energy - o.energy;
                if (gap <= 0.0 || gap > min_gap + window_ev) {
                    continue;
                }
                any_pair = true;
                const PlaneWaveState* si = state_for(o.band);
                const PlaneWaveState* sf = state_for(u.band);

                TransitionCandidate cand;
                cand.initial = {spin, o.band};
                cand.final_state = {spin, u.band};
                cand.spin_channel = spin;
                cand.delta_ks = gap;
                cand.dipole = transition_dipole(*si, *sf);

                // Rotation-invariant magnitude: RSS of |mu|^2 over the
                // degenerate subspaces of both endpoints.
                double sum2 = 0.0;
                for (int im : cluster_of(o.index)) {
                    for (int fm : cluster_of(u.index)) {
                        const auto& iref = all[static_cast<size_t>(im)];
                        const auto& fref = all[static_cast<size_t>(fm)];
                        TransitionDipole d =
                            (iref.index == o.index && fref.index == u.index)
                                ? cand.dipole
                                : transition_dipole(*state_for(iref.band),
                                                    *state_for(fref.band));
                        sum2 += d.magnitude * d.magnitude;
                    }
                }
                cand.tdm = std::sqrt(sum2);

                cand.initial_ipr = ipr(*si, ipr_ctx);
                cand.final_ipr = ipr(*sf, ipr_ctx);
                try {
                    cand.nature = classify_transition(cand.initial_ipr, cand.final_ipr, n_grid,
                                                      ipr_ctx.localization_threshold);
                } catch (const ValidationError&) {
                    dropped_delocalized = true;
                    continue;  // band-to-band pair, not a defect transition
                }
                out.push_back(std::move(cand));
            }
        }
    }

    if (out.empty()) {
        if (dropped_delocalized) {
            throw ValidationError("no defect character");
        }
        if (!any_pair) {
            throw ValidationError("no unoccupied level available");
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.spin_channel, a.initial.band_index, a.final_state.band_index) <
               std::tie(b.spin_channel, b.initial.band_index, b.final_state.band_index);
    });
    return out;
}

const TransitionCandidate* representative_transition(
    const std::vector<TransitionCandidate>& candidates) {
    const TransitionCandidate* best = nullptr;
    for (const auto& c : candidates) {
        if (!best) {
            best = &c;
            continue;
        }
        if (c.tdm > best->tdm + 1e-15 ||
            (std::abs(c.tdm - best->tdm) <= 1e-15 && c.delta_ks < best->delta_ks)) {
            best = &c;
        }
    }
    return best;
}

LifetimeResult radiative_lifetime(double energy_ev, double tdm_debye, double refractive_index,
                                  LifetimeConvention convention) {
    if (!(energy_ev > 0.0)) {
        throw ValidationError("radiative_lifetime: energy must be > 0");
    }
    if (tdm_debye < 0.0) {
        throw ValidationError("radiative_lifetime: TDM must be >= 0");
    }
    LifetimeResult out;
    out.convention = convention;
    if (tdm_debye == 0.0) {
        out.dark = true;
        out.seconds = std::numeric_limits<double>::infinity();
        return out;
    }
    const double nu = energy_ev * kUnits.ev_in_joule / kUnits.planck_h;
    const double mu = tdm_debye * kUnits.debye_in_coulomb_meter;
    const double c3 = std::pow(kUnits.speed_of_light, 3);
    double rate = refractive_index * std::pow(2.0 * kPi, 3) * std::pow(nu, 3) * mu * mu /
                  (3.0 * kUnits.vacuum_permittivity * kUnits.planck_h * c3);
    if (convention == LifetimeConvention::einstein) {
        rate *= 2.0;
    }
    out.seconds = 1.0 / rate;
    return out;
}

double zero_phonon_line(double ground_total_ev, double excited_total_ev) {
    double zpl = excited_total_ev - ground_total_ev;
    if (!(zpl > 0.0)) {
        throw ValidationError("zero_phonon_line: non-positive ZPL (degenerate excitation)");
    }
    return zpl;
}

double bound_exciton_stability(double zpl_ev, double ctl_ev, const HostSpec& host,
                               ExcitonKind kind) {
    if (ctl_ev < 0.0) {
        throw ValidationError("bound_exciton_stability: CTL below the VBM");
    }
    double bes_ev = kind == ExcitonKind::donor ? host.band_gap - ctl_ev - zpl_ev
                                               : ctl_ev - zpl_ev;
    return bes_ev * 1e3;
}

}  // namespace qds
