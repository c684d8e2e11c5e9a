#include "qds/model_lab.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qds/electronic.hpp"
#include "qds/error.hpp"
#include "qds/units.hpp"

namespace qds {

namespace {

constexpr double kConvergenceMev = 1.0;

std::vector<std::array<int, 3>> basis_indices(const WellModelSpec& spec) {
    std::vector<std::array<int, 3>> out;
    const int c = spec.basis_cutoff;
    if (spec.dimension == 1) {
        for (int n = -c; n <= c; ++n) {
            out.push_back({n, 0, 0});
        }
    } else {
        for (int i = -c; i <= c; ++i) {
            for (int j = -c; j <= c; ++j) {
                for (int k = -c; k <= c; ++k) {
                    out.push_back({i, j, k});
                }
            }
        }
    }
    return out;
}

// Fourier component of the potential at integer offset dn, depth given.
double potential_component(const WellModelSpec& spec, const std::array<int, 3>& dn,
                           double depth) {
    const double L = spec.cell_length;
    double v = 0.0;

    // Gaussian well centered at the origin; the analytic transform makes the
    // periodic image sum exact by construction.
    double g2 = 0.0;
    for (int d = 0; d < spec.dimension; ++d) {
        double g = 2.0 * kPi * dn[static_cast<size_t>(d)] / L;
        g2 += g * g;
    }
    double amp = depth * std::pow(spec.defect_width * std::sqrt(2.0 * kPi) / L,
                                  spec.dimension);
    v -= amp * std::exp(-0.5 * g2 * spec.defect_width * spec.defect_width);

    // Host modulation: two periods per cell along each active axis.
    if (spec.host_potential_amplitude != 0.0) {
        for (int d = 0; d < spec.dimension; ++d) {
            bool match = std::abs(dn[static_cast<size_t>(d)]) == 2;
            for (int o = 0; o < spec.dimension; ++o) {
                if (o != d && dn[static_cast<size_t>(o)] != 0) {
                    match = false;
                }
            }
            if (match) {
                v += 0.5 * spec.host_potential_amplitude;
            }
        }
    }
    return v;
}

Eigen::MatrixXd build_hamiltonian(const WellModelSpec& spec, double depth) {
    auto idx = basis_indices(spec);
    const auto n = static_cast<Eigen::Index>(idx.size());
    const double kin = kinetic_prefactor_ev_a2() / spec.effective_mass;
    const double L = spec.cell_length;

    Eigen::MatrixXd h(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            std::array<int, 3> dn{idx[static_cast<size_t>(i)][0] - idx[static_cast<size_t>(j)][0],
                                  idx[static_cast<size_t>(i)][1] - idx[static_cast<size_t>(j)][1],
                                  idx[static_cast<size_t>(i)][2] - idx[static_cast<size_t>(j)][2]};
            double v = potential_component(spec, dn, depth);
            if (i == j) {
                double g2 = 0.0;
                for (int d = 0; d < 3; ++d) {
                    double g = 2.0 * kPi * idx[static_cast<size_t>(i)][static_cast<size_t>(d)] / L;
                    g2 += g * g;
                }
                v += kin * g2;
            }
            h(i, j) = v;
            h(j, i) = v;
        }
    }
    return h;
}

double stage_depth(const WellModelSpec& spec, WellStage stage) {
    return stage == WellStage::base ? spec.defect_depth
                                    : spec.defect_depth * spec.refined_scale;
}

Eigen::VectorXd eigenvalues_only(const Eigen::MatrixXd& h) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw ValidationError("model well: eigendecomposition failed");
    }
    return solver.eigenvalues();
}

struct Filling {
    int up = 0;
    int down = 0;
};

Filling filling_for_charge(const WellModelSpec& spec, int charge) {
    Filling f{spec.electrons_up, spec.electrons_down};
    int q = charge;
    while (q > 0) {  // remove from the majority channel
        if (f.up >= f.down && f.up > 0) {
            --f.up;
        } else if (f.down > 0) {
            --f.down;
        } else {
            throw ValidationError("model corpus: charge removes more electrons than present");
        }
        --q;
    }
    while (q < 0) {  // add to the minority channel
        if (f.down <= f.up) {
            ++f.down;
        } else {
            ++f.up;
        }
        ++q;
    }
    return f;
}

double occupied_sum(const Eigen::VectorXd& eps, const Filling& f) {
    if (f.up > eps.size() || f.down > eps.size()) {
        throw ValidationError("model well: basis too small for the electron count");
    }
    double e = 0.0;
    for (int i = 0; i < f.up; ++i) {
        e += eps(i);
    }
    for (int i = 0; i < f.down; ++i) {
        e += eps(i);
    }
    return e;
}

}  // namespace

void WellModelSpec::validate() const {
    if (dimension != 1 && dimension != 3) {
        throw ValidationError("well spec: dimension must be 1 or 3");
    }
    if (basis_cutoff < 4) {
        throw ValidationError("well spec: basis_cutoff must be >= 4");
    }
    if (!(cell_length > 0.0)) {
        throw ValidationError("well spec: cell_length must be > 0");
    }
    if (!(defect_width > 0.0) || defect_width >= cell_length / 4.0) {
        throw ValidationError("well spec: defect_width must be in (0, cell_length/4)");
    }
    if (refined_scale < 0.5 || refined_scale > 2.0) {
        throw ValidationError("well spec: refined_scale must be in [0.5, 2]");
    }
    if (!(effective_mass > 0.0)) {
        throw ValidationError("well spec: effective_mass must be > 0");
    }
    if (electrons_up < 0 || electrons_down < 0) {
        throw ValidationError("well spec: electron counts must be >= 0");
    }
}

void ConfigCoordSpec::validate() const {
    base.validate();
    if (!(spring_k > 0.0)) {
        throw ValidationError("config-coordinate spec: spring_k must be > 0");
    }
    if (!(mode_mass > 0.0) || !(transverse_k > 0.0)) {
        throw ValidationError("config-coordinate spec: masses and springs must be > 0");
    }
}

std::shared_ptr<const std::vector<Vec3>> well_basis(const WellModelSpec& spec) {
    auto idx = basis_indices(spec);
    auto basis = std::make_shared<std::vector<Vec3>>();
    basis->reserve(idx.size());
    for (const auto& n : idx) {
        basis->push_back({n[0] / spec.cell_length, n[1] / spec.cell_length,
                          n[2] / spec.cell_length});
    }
    return basis;
}

Eigen::MatrixXd well_hamiltonian(const WellModelSpec& spec, WellStage stage) {
    spec.validate();
    return build_hamiltonian(spec, stage_depth(spec, stage));
}

WellSolution solve_well(const WellModelSpec& spec, WellStage stage, bool check_convergence) {
    spec.validate();
    Eigen::MatrixXd h = build_hamiltonian(spec, stage_depth(spec, stage));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success) {
        throw ValidationError("model well: eigendecomposition failed");
    }

    if (check_convergence) {
        WellModelSpec bigger = spec;
        bigger.basis_cutoff += 2;
        Eigen::VectorXd ref =
            eigenvalues_only(build_hamiltonian(bigger, stage_depth(spec, stage)));
        if (std::abs(solver.eigenvalues()(0) - ref(0)) > kConvergenceMev * 1e-3) {
            throw ValidationError("unconverged basis: ground state moves by more than 1 meV");
        }
    }

    WellSolution out;
    out.basis = well_basis(spec);
    const auto n = static_cast<Eigen::Index>(out.basis->size());
    out.levels.kpoint = "Gamma";
    for (Eigen::Index i = 0; i < n; ++i) {
        PlaneWaveState state;
        state.basis = out.basis;
        state.eigenvalue = solver.eigenvalues()(i);
        state.spin = Spin::up;
        state.band_index = static_cast<int>(i);
        state.coefficients.resize(static_cast<size_t>(n));
        for (Eigen::Index k = 0; k < n; ++k) {
            state.coefficients[static_cast<size_t>(k)] =
                std::complex<double>(solver.eigenvectors()(k, i), 0.0);
        }
        out.states.push_back(std::move(state));
        out.levels.eigenvalues.push_back(solver.eigenvalues()(i));
    }
    return out;
}

double cc_electronic_energy(const ConfigCoordSpec& spec, double q, CcOccupation occupation) {
    WellModelSpec well = spec.base;
    well.defect_depth = spec.base.defect_depth + spec.coupling * q;
    Eigen::VectorXd eps = eigenvalues_only(build_hamiltonian(well, well.defect_depth));

    Filling f{spec.base.electrons_up, spec.base.electrons_down};
    if (occupation == CcOccupation::ground) {
        return occupied_sum(eps, f);
    }

    // Promote one electron HOMO -> LUMO in the majority channel.
    int& n_major = f.up >= f.down ? f.up : f.down;
    if (n_major == 0) {
        throw ValidationError("relax_and_excite: no electron to promote");
    }
    int homo = n_major - 1;
    int lumo = n_major;
    if (lumo >= eps.size() || !(eps(lumo) < 0.0)) {
        throw ValidationError("relax_and_excite: no bound excited level to promote into");
    }
    double e = occupied_sum(eps, f);
    return e - eps(homo) + eps(lumo);
}

RelaxResult relax_and_excite(const ConfigCoordSpec& spec, CcOccupation occupation) {
    spec.validate();
    auto energy = [&](double q) {
        return cc_electronic_energy(spec, q, occupation) +
               0.5 * spec.spring_k * q * q;
    };

    // Golden-section bracket on a generous coordinate range.
    double lo = -3.0;
    double hi = 3.0;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - gr * (hi - lo);
    double b = lo + gr * (hi - lo);
    double fa = energy(a);
    double fb = energy(b);
    while (hi - lo > 1e-6) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - gr * (hi - lo);
            fa = energy(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + gr * (hi - lo);
            fb = energy(b);
        }
    }
    double q = 0.5 * (lo + hi);

    // Derivative-based polish: golden section alone is limited by the
    // function-value noise floor near a quadratic minimum.
    const double h = 1e-4;
    for (int iter = 0; iter < 4; ++iter) {
        double ep = energy(q + h);
        double em = energy(q - h);
        double e0 = energy(q);
        double d1 = (ep - em) / (2.0 * h);
        double d2 = (ep - 2.0 * e0 + em) / (h * h);
        if (!(d2 > 0.0)) {
            break;
        }
        double step = d1 / d2;
        if (std::abs(step) > 0.5) {
            step = std::copysign(0.5, step);
        }
        q -= step;
        if (std::abs(step) < 1e-12) {
            break;
        }
    }

    return {q, energy(q)};
}

BallSpringStructure dimer_structure(double mass_amu, double bond_length_a) {
    BallSpringStructure s;
    s.positions = {{0.0, 0.0, 0.0}, {bond_length_a, 0.0, 0.0}};
    s.masses = {mass_amu, mass_amu};
    return s;
}

Eigen::MatrixXd dimer_force_constants(double k_rel, double k_trans) {
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(6, 6);
    auto couple = [&](int axis, double k) {
        phi(axis, axis) += k;
        phi(3 + axis, 3 + axis) += k;
        phi(axis, 3 + axis) -= k;
        phi(3 + axis, axis) -= k;
    };
    couple(0, k_rel);
    couple(1, k_trans);
    couple(2, k_trans);
    return phi;
}

BallSpringStructure chain_structure(int n_atoms, double mass_amu, double spacing_a) {
    BallSpringStructure s;
    for (int i = 0; i < n_atoms; ++i) {
        s.positions.push_back({i * spacing_a, 0.0, 0.0});
        s.masses.push_back(mass_amu);
    }
    return s;
}

Eigen::MatrixXd chain_force_constants(int n_atoms, double k_long, double k_trans) {
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(3 * n_atoms, 3 * n_atoms);
    for (int i = 0; i < n_atoms; ++i) {
        int j = (i + 1) % n_atoms;
        for (int axis = 0; axis < 3; ++axis) {
            double k = axis == 0 ? k_long : k_trans;
            phi(3 * i + axis, 3 * i + axis) += k;
            phi(3 * j + axis, 3 * j + axis) += k;
            phi(3 * i + axis, 3 * j + axis) -= k;
            phi(3 * j + axis, 3 * i + axis) -= k;
        }
    }
    return phi;
}

ForceProvider harmonic_force_provider(Eigen::MatrixXd phi, BallSpringStructure equilibrium) {
    return [phi = std::move(phi), eq = std::move(equilibrium)](const std::vector<Vec3>& pos) {
        const int n = static_cast<int>(eq.positions.size());
        Eigen::VectorXd u(3 * n);
        for (int a = 0; a < n; ++a) {
            for (int d = 0; d < 3; ++d) {
                u(3 * a + d) = pos[static_cast<size_t>(a)][static_cast<size_t>(d)] -
                               eq.positions[static_cast<size_t>(a)][static_cast<size_t>(d)];
            }
        }
        Eigen::VectorXd f = -phi * u;
        std::vector<Vec3> out(static_cast<size_t>(n));
        for (int a = 0; a < n; ++a) {
            for (int d = 0; d < 3; ++d) {
                out[static_cast<size_t>(a)][static_cast<size_t>(d)] = f(3 * a + d);
            }
        }
        return out;
    };
}

GeneratedCorpus generate_corpus(const std::vector<CorpusEntry>& entries,
                                const ModelHostConfig& host_config) {
    if (entries.empty()) {
        throw ValidationError("generate_corpus: no entries");
    }

    GeneratedCorpus corpus;
    const WellModelSpec& ref = entries.front().well;
    ref.validate();

    corpus.host.band_gap = host_config.band_gap;
    corpus.host.vbm_reference = 0.0;
    corpus.host.refractive_index = host_config.refractive_index;
    corpus.host.dielectric_constant = host_config.dielectric_constant;
    corpus.host.lattice_vectors = {Vec3{ref.cell_length, 0.0, 0.0},
                                   Vec3{0.0, ref.cell_length, 0.0},
                                   Vec3{0.0, 0.0, ref.cell_length}};

    // Host reference: the same cell without the defect well, same filling.
    {
        WellModelSpec host_well = ref;
        host_well.defect_depth = 0.0;
        Eigen::VectorXd eps = eigenvalues_only(build_hamiltonian(host_well, 0.0));
        Filling f{ref.electrons_up, ref.electrons_down};
        corpus.host.bulk_total_energy_per_supercell =
            occupied_sum(eps, f) + (f.up + f.down) * host_config.vbm_shift;
    }

    corpus.chempots.label = host_config.chempot_label;
    corpus.chempots.chemical_potentials[corpus.host.host_element] = 0.0;

    for (const auto& entry : entries) {
        corpus.chempots.chemical_potentials[entry.element] = 0.0;
        bool first_charge = true;
        for (int charge : entry.emit_charges) {
            WellModelSpec well = entry.well;
            double q_ground = 0.0;
            double total_electronic = 0.0;
            std::optional<double> excited_total;
            std::optional<double> delta_q;

            if (entry.config_coord) {
                ConfigCoordSpec cc = *entry.config_coord;
                cc.base = entry.well;
                Filling f = filling_for_charge(entry.well, charge);
                cc.base.electrons_up = f.up;
                cc.base.electrons_down = f.down;
                RelaxResult ground = relax_and_excite(cc, CcOccupation::ground);
                q_ground = ground.q_star;
                total_electronic = ground.total_energy;
                try {
                    RelaxResult excited = relax_and_excite(cc, CcOccupation::promoted);
                    excited_total = excited.total_energy;
                    delta_q = excited.q_star - ground.q_star;
                } catch (const ValidationError&) {
                    // Nothing to promote in this charge state; the record
                    // simply carries no excited-state data.
                }
                well.defect_depth = entry.well.defect_depth + cc.coupling * q_ground;
            }

            WellSolution base = solve_well(well, WellStage::base, first_charge);
            first_charge = false;
            Filling f = filling_for_charge(entry.well, charge);
            int n_e = f.up + f.down;
            if (!entry.config_coord) {
                Eigen::VectorXd eps(static_cast<Eigen::Index>(base.levels.eigenvalues.size()));
                for (Eigen::Index i = 0; i < eps.size(); ++i) {
                    eps(i) = base.levels.eigenvalues[static_cast<size_t>(i)];
                }
                total_electronic = occupied_sum(eps, f);
            }

            int n_store = std::min(static_cast<int>(base.states.size()),
                                   std::max(f.up, f.down) + 8);
            std::vector<PlaneWaveState> stored(base.states.begin(),
                                               base.states.begin() + n_store);

            Eigen::MatrixXd h_ref = well_hamiltonian(well, WellStage::refined);
            SingleShotLevels corrected = single_shot_levels(stored, h_ref.cast<std::complex<double>>());

            DefectRecord rec;
            rec.element = entry.element;
            rec.site = entry.site;
            rec.charge = charge;
            rec.supercell_atoms = 2;
            rec.total_energy = total_electronic + n_e * host_config.vbm_shift;
            if (excited_total) {
                rec.excited_total_energy = *excited_total + n_e * host_config.vbm_shift;
            }

            EnergyLevelSet base_set;
            base_set.kpoint = "Gamma";
            for (int i = 0; i < n_store; ++i) {
                base_set.eigenvalues.push_back(base.levels.eigenvalues[static_cast<size_t>(i)] +
                                               host_config.vbm_shift);
            }
            EnergyLevelSet corr_set = corrected.levels;
            for (double& e : corr_set.eigenvalues) {
                e += host_config.vbm_shift;
            }
            bool identity = true;
            for (size_t i = 0; i < corr_set.band_indices.size(); ++i) {
                if (corr_set.band_indices[i] != static_cast<int>(i)) {
                    identity = false;
                    break;
                }
            }
            if (identity) {
                corr_set.band_indices.clear();
            }
            rec.level_sets[LevelStage::base][Spin::up] = base_set;
            rec.level_sets[LevelStage::base][Spin::down] = base_set;
            rec.level_sets[LevelStage::corrected][Spin::up] = corr_set;
            rec.level_sets[LevelStage::corrected][Spin::down] = corr_set;

            std::vector<double> occ_up(static_cast<size_t>(n_store), 0.0);
            std::vector<double> occ_dn(static_cast<size_t>(n_store), 0.0);
            for (int i = 0; i < f.up; ++i) {
                occ_up[static_cast<size_t>(i)] = 1.0;
            }
            for (int i = 0; i < f.down; ++i) {
                occ_dn[static_cast<size_t>(i)] = 1.0;
            }
            rec.occupations[Spin::up] = occ_up;
            rec.occupations[Spin::down] = occ_dn;

            WavefunctionSet wf;
            wf.basis = base.basis;
            for (const auto& spin : {Spin::up, Spin::down}) {
                for (int i = 0; i < n_store; ++i) {
                    PlaneWaveState s = stored[static_cast<size_t>(i)];
                    s.spin = spin;
                    s.eigenvalue += host_config.vbm_shift;
                    wf.states.push_back(std::move(s));
                }
            }
            rec.wavefunctions = std::move(wf);

            if (entry.config_coord && delta_q) {
                DisplacementField disp;
                disp.delta_r = {{*delta_q / 2.0, 0.0, 0.0}, {-*delta_q / 2.0, 0.0, 0.0}};
                disp.masses = {entry.config_coord->mode_mass, entry.config_coord->mode_mass};
                rec.displacement_vector = std::move(disp);

                Eigen::MatrixXd phi = dimer_force_constants(entry.config_coord->spring_k,
                                                            entry.config_coord->transverse_k);
                SymmetricMatrix sm;
                sm.dim = 6;
                sm.values.assign(phi.data(), phi.data() + 36);
                rec.force_constants = std::move(sm);
            }

            rec.provenance = "model-lab generated record";
            corpus.records.push_back(std::move(rec));
        }
    }
    return corpus;
}

std::vector<CorpusEntry> randomized_entries(unsigned long long seed, int count) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const std::vector<std::string> elements = {"Ti", "Fe", "Ru", "Zr", "Na", "Nb",
                                               "Ni", "Mn", "Co", "Mo", "W",  "Cu"};
    std::vector<CorpusEntry> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        CorpusEntry entry;
        entry.element = elements[static_cast<size_t>(i) % elements.size()] +
                        (i >= static_cast<int>(elements.size())
                             ? std::to_string(i / static_cast<int>(elements.size()))
                             : "");
        entry.site = Site::tet_interstitial;
        entry.well.dimension = 1;
        entry.well.cell_length = 14.0 + 10.0 * u01(rng);
        entry.well.basis_cutoff = 10 + static_cast<int>(u01(rng) * 4.999);
        entry.well.effective_mass = 1.0;
        entry.well.host_potential_amplitude = 0.3 * u01(rng);
        entry.well.defect_depth = 2.5 + 2.5 * u01(rng);
        entry.well.defect_width = 0.35 + 0.45 * u01(rng);
        entry.well.refined_scale = 0.9 + 0.3 * u01(rng);
        entry.well.electrons_up = 1 + static_cast<int>(u01(rng) * 2.999);
        entry.well.electrons_down = static_cast<int>(u01(rng) * (entry.well.electrons_up + 0.999));
        entry.emit_charges = {0};
        if (i % 5 == 4) {
            ConfigCoordSpec cc;
            cc.spring_k = 1.0 + 2.0 * u01(rng);
            cc.coupling = 0.02 + 0.08 * u01(rng);
            cc.mode_mass = 20.0 + 20.0 * u01(rng);
            entry.config_coord = cc;
        }
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace qds
