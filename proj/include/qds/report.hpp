#pragma once

#include <optional>
#include <string>

#include "qds/pipeline.hpp"

namespace qds {

struct ReportOptions {
    bool svg = false;
    double isoline_e_min = 0.5;  // eV
    double isoline_e_max = 1.5;  // eV
};

struct ReportDocuments {
    std::string summary_text;
    std::string report_json;
    std::string finalists_csv;
    std::string scatter_csv;
    std::string histogram_csv;
    std::string isolines_csv;
    std::optional<std::string> scatter_svg;
    std::optional<std::string> histogram_svg;
};

/// Render every report format. All outputs are deterministic functions of
/// the report content.
ReportDocuments emit_report(const ScreeningReport& report, const ReportOptions& options = {});

std::string serialize_report(const ScreeningReport& report);
ScreeningReport parse_report(const std::string& text);

/// Inverse of the radiative-lifetime formula: the TDM magnitude that gives
/// lifetime tau at transition energy E. Used for the report's isolines.
double tdm_for_lifetime(double energy_ev, double lifetime_s, double refractive_index,
                        LifetimeConvention convention);

}  // namespace qds
