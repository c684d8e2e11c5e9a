#pragma once

#include <string>

#include "qds/error.hpp"

namespace qds {

inline constexpr double kPi = 3.14159265358979323846;

/// CODATA-2018 physical constants. SI units unless stated otherwise.
/// Derived entries are computed from the primary ones so that all
/// downstream arithmetic shares one set of values.
struct UnitConstants {
    double planck_h;                      // J*s
    double hbar;                          // J*s
    double electron_mass;                 // kg
    double elementary_charge;             // C
    double vacuum_permittivity;           // F/m
    double speed_of_light;                // m/s
    double debye_in_coulomb_meter;        // C*m, 1 D = 1e-21/c
    double ev_in_joule;                   // J
    double atomic_mass_kg;                // kg per amu
    double coulomb_constant_ev_angstrom;  // e^2/(4 pi eps0), eV*Angstrom
};

constexpr UnitConstants make_unit_constants() {
    UnitConstants u{};
    u.planck_h = 6.62607015e-34;
    u.hbar = u.planck_h / (2.0 * kPi);
    u.electron_mass = 9.1093837015e-31;
    u.elementary_charge = 1.602176634e-19;
    u.vacuum_permittivity = 8.8541878128e-12;
    u.speed_of_light = 299792458.0;
    u.debye_in_coulomb_meter = 1.0e-21 / u.speed_of_light;
    u.ev_in_joule = 1.602176634e-19;
    u.atomic_mass_kg = 1.66053906660e-27;
    u.coulomb_constant_ev_angstrom =
        u.elementary_charge * 1.0e10 / (4.0 * kPi * u.vacuum_permittivity);
    return u;
}

inline constexpr UnitConstants kUnits = make_unit_constants();

/// hbar^2/(2 m_e) in eV*Angstrom^2, the free-electron kinetic prefactor.
constexpr double kinetic_prefactor_ev_a2() {
    return kUnits.hbar * kUnits.hbar * 1.0e20 /
           (2.0 * kUnits.electron_mass * kUnits.ev_in_joule);
}

enum class DipoleUnit { electron_angstrom, debye, coulomb_meter };

DipoleUnit parse_dipole_unit(const std::string& tag);

/// Exact linear conversion between the three dipole units the pipeline uses.
double convert_dipole(double value, DipoleUnit from, DipoleUnit to);

// Thin value wrappers for quantities whose unit is load-bearing at an API
// boundary. Construction validates finiteness (and sign for magnitudes).
struct EnergyEV {
    double value;
    explicit EnergyEV(double v);
};

struct LengthAngstrom {
    double value;
    explicit LengthAngstrom(double v);
};

struct DipoleDebye {
    double value;  // magnitude, >= 0
    explicit DipoleDebye(double v);
};

struct TimeSecond {
    double value;
    explicit TimeSecond(double v);
};

}  // namespace qds
