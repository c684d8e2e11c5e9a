#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qds/electronic.hpp"
#include "qds/store.hpp"
#include "qds/thermo.hpp"

namespace qds {

/// Thresholds of the tiered screen. A threshold of zero (or a false flag)
/// makes its check vacuous: records lacking the corresponding data pass
/// through instead of being eliminated for insufficient data.
struct TierConfig {
    double min_transition_energy = 0.700;  // eV
    double min_tdm = 2.0;                  // Debye
    double refine_min_delta_ks = 0.800;    // eV
    double min_zpl = 0.700;                // eV
    bool require_positive_bes = true;
    bool require_nonsinglet = true;
    double degeneracy_window = 0.100;      // eV
    LifetimeConvention lifetime_convention = LifetimeConvention::einstein;

    // Engine knobs (serialized but not part of the physics thresholds).
    int ipr_grid_points = 64;
    double localization_threshold = 10.0;
    bool spin_from_aufbau = false;

    void validate() const;
};

TierConfig parse_tier_config(const std::string& text);
std::string serialize_tier_config(const TierConfig& config);

struct ElementSpec {
    std::string symbol;
    std::vector<int> common_oxidation_states;
    bool implantable = true;

    void validate() const;
};

std::vector<ElementSpec> parse_elements(const std::string& text);

struct ChargeRule {
    bool add_neighbors = true;  // include q +/- 1 around each base charge
    int q_min = -4;
    int q_max = 4;
};

struct CandidateKey {
    std::string element;
    Site site;
    int charge;
};

/// Candidate (element, site, charge) tuples: substitutional base charges are
/// {o - 4}, interstitial ones {o} + {0}; the default rule adds +/-1 neighbors
/// and drops charges outside [q_min, q_max].
std::vector<CandidateKey> enumerate_candidates(const std::vector<ElementSpec>& elements,
                                               const std::vector<Site>& sites,
                                               const ChargeRule& rule = {});

struct FinalCandidate {
    std::string defect_id;
    double delta_ks = 0.0;  // eV
    double zpl = 0.0;       // eV
    double tdm = 0.0;       // Debye
    bool dark = false;
    double lifetime_s = 0.0;
    double ctl = 0.0;  // eV
    std::string ctl_label;
    bool ctl_fallback = false;
    double bes = 0.0;  // meV, value used by the screen
    std::optional<double> bes_formula;  // meV, recomputed from CTL + ZPL
    bool bes_flagged = false;           // override disagrees with the formula
    double total_spin = 0.0;
    TransitionNature nature = TransitionNature::intra_defect;
    std::optional<double> hr_total;
    double window_lo = 0.0;
    double window_hi = 0.0;
};

struct Elimination {
    std::string defect_id;
    int tier = 0;  // first failing tier, 1-based
    std::string reason;
};

struct TierSummary {
    int tier = 0;
    std::string name;
    std::vector<std::string> survivors;  // defect ids, sorted
};

struct ScatterRow {
    std::string defect_id;
    double delta_ks = 0.0;
    double tdm = 0.0;
    TransitionNature nature = TransitionNature::intra_defect;
    double window_width = 0.0;
    bool dark = false;
    double lifetime_s = 0.0;
};

/// Record whose ingested BES disagrees with the CTL/ZPL formula by more than
/// the agreement tolerance — surfaced regardless of the tier outcome.
struct BesFlag {
    std::string defect_id;
    double bes_override = 0.0;          // meV
    std::optional<double> bes_formula;  // meV
};

struct ScreeningReport {
    TierConfig config;
    HostSpec host;
    int record_count = 0;
    std::vector<TierSummary> tiers;         // one entry per tier, in order
    std::vector<Elimination> eliminations;  // sorted by defect_id
    std::vector<FinalCandidate> finalists;  // ranked by TDM desc, ZPL desc, id
    std::vector<ScatterRow> scatter;        // tier-2 survivors with transitions
    std::vector<BesFlag> bes_flags;         // override/formula disagreements
};

struct RunOptions {
    int jobs = 0;  // 0 = hardware concurrency
};

/// Runs the tiered screen over every record in the store. Missing data at an
/// active tier eliminates with reason "insufficient data", never a crash.
ScreeningReport run_screen(const DefectStore& store, const HostSpec& host,
                           const TierConfig& config, const RunOptions& options = {});

}  // namespace qds
