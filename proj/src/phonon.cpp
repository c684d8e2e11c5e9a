#include "qds/phonon.hpp"

#include <cmath>

#include "qds/error.hpp"
#include "qds/units.hpp"

namespace qds {

namespace {

// omega^2 in (eV/A^2)/amu -> hbar*omega in meV.
double eigenvalue_to_mev(double lambda) {
    const double k_si = kUnits.ev_in_joule / 1e-20;  // eV/A^2 -> J/m^2
    double omega2_si = std::abs(lambda) * k_si / kUnits.atomic_mass_kg;
    double e_mev = kUnits.hbar * std::sqrt(omega2_si) / kUnits.ev_in_joule * 1e3;
    return lambda >= 0.0 ? e_mev : -e_mev;
}

}  // namespace

PhononSet phonon_modes(const Eigen::MatrixXd& force_constants_ev_a2,
                       const std::vector<double>& masses_amu,
                       const PhononOptions& options) {
    const int n_atoms = static_cast<int>(masses_amu.size());
    const int dim = 3 * n_atoms;
    if (force_constants_ev_a2.rows() != dim || force_constants_ev_a2.cols() != dim) {
        throw ValidationError("phonon_modes: force-constant matrix dimension mismatch");
    }
    double asym = (force_constants_ev_a2 - force_constants_ev_a2.transpose())
                      .cwiseAbs()
                      .maxCoeff();
    if (asym > 1e-8) {
        throw ValidationError("phonon_modes: force-constant matrix not symmetric");
    }
    for (double m : masses_amu) {
        if (!(m > 0.0)) {
            throw ValidationError("phonon_modes: masses must be > 0");
        }
    }

    Eigen::VectorXd inv_sqrt_m(dim);
    for (int a = 0; a < n_atoms; ++a) {
        for (int al = 0; al < 3; ++al) {
            inv_sqrt_m(3 * a + al) = 1.0 / std::sqrt(masses_amu[static_cast<size_t>(a)]);
        }
    }
    Eigen::MatrixXd dyn = inv_sqrt_m.asDiagonal() * force_constants_ev_a2 *
                          inv_sqrt_m.asDiagonal();
    dyn = 0.5 * (dyn + dyn.transpose());

    if (options.project_translations) {
        // Mass-weighted rigid translations; P D P guarantees three exact
        // zero modes and translation-invariant Huang-Rhys factors.
        Eigen::MatrixXd t(dim, 3);
        t.setZero();
        for (int a = 0; a < n_atoms; ++a) {
            double sm = std::sqrt(masses_amu[static_cast<size_t>(a)]);
            for (int al = 0; al < 3; ++al) {
                t(3 * a + al, al) = sm;
            }
        }
        for (int c = 0; c < 3; ++c) {
            t.col(c).normalize();
        }
        Eigen::MatrixXd projector =
            Eigen::MatrixXd::Identity(dim, dim) - t * t.transpose();
        dyn = projector * dyn * projector;
        dyn = 0.5 * (dyn + dyn.transpose());
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dyn);
    if (solver.info() != Eigen::Success) {
        throw ValidationError("phonon_modes: eigendecomposition failed");
    }

    PhononSet set;
    set.masses = masses_amu;
    set.eigenvectors = solver.eigenvectors();
    set.frequencies.reserve(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        double f = eigenvalue_to_mev(solver.eigenvalues()(i));
        if (f < -options.imaginary_tolerance_mev) {
            throw ValidationError("phonon_modes: imaginary frequency " + std::to_string(-f) +
                                  " meV beyond tolerance");
        }
        set.frequencies.push_back(f);
    }
    return set;
}

Eigen::MatrixXd finite_displacement_force_constants(const ForceProvider& forces,
                                                    const BallSpringStructure& structure,
                                                    double displacement_a) {
    const int n_atoms = static_cast<int>(structure.positions.size());
    const int dim = 3 * n_atoms;
    if (!(displacement_a > 0.0)) {
        throw ValidationError("finite_displacement: displacement must be > 0");
    }

    auto force_vector = [&](const std::vector<Vec3>& pos) {
        std::vector<Vec3> f = forces(pos);
        if (static_cast<int>(f.size()) != n_atoms) {
            throw ValidationError("finite_displacement: force provider returned wrong size");
        }
        Eigen::VectorXd v(dim);
        for (int b = 0; b < n_atoms; ++b) {
            for (int be = 0; be < 3; ++be) {
                v(3 * b + be) = f[static_cast<size_t>(b)][static_cast<size_t>(be)];
            }
        }
        return v;
    };

    Eigen::MatrixXd phi(dim, dim);
    for (int a = 0; a < n_atoms; ++a) {
        for (int al = 0; al < 3; ++al) {
            std::vector<Vec3> plus = structure.positions;
            std::vector<Vec3> minus = structure.positions;
            plus[static_cast<size_t>(a)][static_cast<size_t>(al)] += displacement_a;
            minus[static_cast<size_t>(a)][static_cast<size_t>(al)] -= displacement_a;
            Eigen::VectorXd df = force_vector(plus) - force_vector(minus);
            phi.row(3 * a + al) = -df.transpose() / (2.0 * displacement_a);
        }
    }

    double asym = (phi - phi.transpose()).cwiseAbs().maxCoeff();
    phi = 0.5 * (phi + phi.transpose());
    if (asym > 1e-6) {
        throw ValidationError("finite_displacement: asymmetry " + std::to_string(asym) +
                              " beyond 1e-6 after symmetrization");
    }

    // Acoustic sum rule: self terms balance the row sums.
    for (int a = 0; a < n_atoms; ++a) {
        for (int al = 0; al < 3; ++al) {
            for (int be = 0; be < 3; ++be) {
                double row_sum = 0.0;
                for (int b = 0; b < n_atoms; ++b) {
                    if (b == a) {
                        continue;
                    }
                    row_sum += phi(3 * a + al, 3 * b + be);
                }
                phi(3 * a + al, 3 * a + be) = -row_sum;
            }
        }
    }
    phi = 0.5 * (phi + phi.transpose());
    return phi;
}

HuangRhysDecomposition partial_hr_factors(const PhononSet& phonons,
                                          const std::vector<Vec3>& delta_r_a,
                                          const std::vector<double>& masses_amu) {
    const int n_atoms = phonons.n_atoms();
    if (static_cast<int>(delta_r_a.size()) != n_atoms ||
        static_cast<int>(masses_amu.size()) != n_atoms) {
        throw ValidationError("partial_hr_factors: displacement dimension mismatch");
    }

    // Mass-weighted displacement in sqrt(amu)*A.
    Eigen::VectorXd q(3 * n_atoms);
    for (int a = 0; a < n_atoms; ++a) {
        double sm = std::sqrt(masses_amu[static_cast<size_t>(a)]);
        for (int al = 0; al < 3; ++al) {
            q(3 * a + al) = sm * delta_r_a[static_cast<size_t>(a)][static_cast<size_t>(al)];
        }
    }

    HuangRhysDecomposition hr;
    hr.partial_factors.reserve(phonons.frequencies.size());
    const double q2_si = kUnits.atomic_mass_kg * 1e-20;  // amu*A^2 -> kg*m^2
    for (size_t k = 0; k < phonons.frequencies.size(); ++k) {
        double e_mev = phonons.frequencies[k];
        double qk = phonons.eigenvectors.col(static_cast<Eigen::Index>(k)).dot(q);
        double s = 0.0;
        if (e_mev > 0.0) {
            double omega = e_mev * 1e-3 * kUnits.ev_in_joule / kUnits.hbar;
            s = omega * qk * qk * q2_si / (2.0 * kUnits.hbar);
        }
        hr.partial_factors.push_back(s);
        hr.total += s;
    }
    return hr;
}

std::vector<double> spectral_density(const HuangRhysDecomposition& hr,
                                     const PhononSet& phonons, double sigma_mev,
                                     const std::vector<double>& energies_mev) {
    if (hr.partial_factors.size() != phonons.frequencies.size()) {
        throw ValidationError("spectral_density: decomposition/mode shape mismatch");
    }
    if (!(sigma_mev > 0.0)) {
        throw ValidationError("spectral_density: broadening must be > 0");
    }
    const double norm = 1.0 / (sigma_mev * std::sqrt(2.0 * kPi));
    std::vector<double> out(energies_mev.size(), 0.0);
    for (size_t k = 0; k < phonons.frequencies.size(); ++k) {
        double s = hr.partial_factors[k];
        if (s == 0.0) {
            continue;
        }
        double wk = phonons.frequencies[k];
        for (size_t i = 0; i < energies_mev.size(); ++i) {
            double x = (energies_mev[i] - wk) / sigma_mev;
            out[i] += s * norm * std::exp(-0.5 * x * x);
        }
    }
    return out;
}

}  // namespace qds
