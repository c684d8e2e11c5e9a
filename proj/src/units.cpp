#include "qds/units.hpp"

#include <cmath>

namespace qds {

namespace {

double require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw ValidationError(std::string(what) + ": non-finite value");
    }
    return v;
}

// Conversion factor from `unit` to C*m.
double to_coulomb_meter_factor(DipoleUnit unit) {
    switch (unit) {
        case DipoleUnit::electron_angstrom:
            return kUnits.elementary_charge * 1.0e-10;
        case DipoleUnit::debye:
            return kUnits.debye_in_coulomb_meter;
        case DipoleUnit::coulomb_meter:
            return 1.0;
    }
    throw ValidationError("convert_dipole: unknown unit tag");
}

}  // namespace

DipoleUnit parse_dipole_unit(const std::string& tag) {
    if (tag == "e*A" || tag == "eA" || tag == "electron_angstrom") {
        return DipoleUnit::electron_angstrom;
    }
    if (tag == "D" || tag == "debye") {
        return DipoleUnit::debye;
    }
    if (tag == "C*m" || tag == "Cm" || tag == "coulomb_meter") {
        return DipoleUnit::coulomb_meter;
    }
    throw ValidationError("unknown dipole unit tag: " + tag);
}

double convert_dipole(double value, DipoleUnit from, DipoleUnit to) {
    require_finite(value, "convert_dipole");
    return value * to_coulomb_meter_factor(from) / to_coulomb_meter_factor(to);
}

EnergyEV::EnergyEV(double v) : value(require_finite(v, "EnergyEV")) {}

LengthAngstrom::LengthAngstrom(double v) : value(require_finite(v, "LengthAngstrom")) {}

DipoleDebye::DipoleDebye(double v) : value(require_finite(v, "DipoleDebye")) {
    if (value < 0.0) {
        throw ValidationError("DipoleDebye: magnitude must be >= 0");
    }
}

TimeSecond::TimeSecond(double v) : value(require_finite(v, "TimeSecond")) {}

}  // namespace qds
