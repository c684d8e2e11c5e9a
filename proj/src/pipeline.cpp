#include "qds/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "qds/error.hpp"
#include "qds/lineshape.hpp"
#include "qds/phonon.hpp"

namespace qds {

using nlohmann::json;

namespace {

constexpr double kBesAgreementMev = 5.0;  // override vs formula consistency

const char* const kTierNames[5] = {
    "charge stability", "spin multiplicity", "optical transition",
    "refined transition", "emission viability",
};

std::string format_ev(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

// Thermodynamic context shared by all records of one (element, site) group.
struct GroupThermo {
    std::vector<FormationLine> lines;
    std::vector<StabilityWindow> windows;
    std::vector<ChargeTransitionLevel> ctls;
    std::map<std::string, std::string> record_errors;  // defect_id -> message
};

struct CtlSelection {
    ChargeTransitionLevel ctl;
    bool fallback = false;
};

std::optional<CtlSelection> select_ctl(const std::vector<ChargeTransitionLevel>& ctls,
                                       int q, ExcitonKind kind) {
    auto find_exact = [&](int upper, int lower) -> const ChargeTransitionLevel* {
        for (const auto& c : ctls) {
            if (c.q_upper == upper && c.q_lower == lower) {
                return &c;
            }
        }
        return nullptr;
    };
    if (kind == ExcitonKind::donor) {
        if (const auto* c = find_exact(q + 1, q)) {
            return CtlSelection{*c, false};
        }
        // Nearest available level on the higher-charge side of q, then the
        // lower edge as a last resort.
        const ChargeTransitionLevel* best = nullptr;
        for (const auto& c : ctls) {
            if (c.q_lower == q && c.q_upper > q && (!best || c.q_upper < best->q_upper)) {
                best = &c;
            }
        }
        if (!best) {
            for (const auto& c : ctls) {
                if (c.q_upper == q && c.q_lower < q && (!best || c.q_lower > best->q_lower)) {
                    best = &c;
                }
            }
        }
        if (best) {
            return CtlSelection{*best, true};
        }
        return std::nullopt;
    }
    // acceptor
    if (const auto* c = find_exact(q, q - 1)) {
        return CtlSelection{*c, false};
    }
    const ChargeTransitionLevel* best = nullptr;
    for (const auto& c : ctls) {
        if (c.q_upper == q && c.q_lower < q && (!best || c.q_lower > best->q_lower)) {
            best = &c;
        }
    }
    if (!best) {
        for (const auto& c : ctls) {
            if (c.q_lower == q && c.q_upper > q && (!best || c.q_upper < best->q_upper)) {
                best = &c;
            }
        }
    }
    if (best) {
        return CtlSelection{*best, true};
    }
    return std::nullopt;
}

// A transition the tiers can evaluate, whether ingested or computed.
struct TransitionView {
    double delta_ks = 0.0;
    double tdm = 0.0;
    TransitionNature nature = TransitionNature::intra_defect;
};

struct Verdict {
    std::string defect_id;
    int failed_tier = 0;  // 0 = finalist
    std::string reason;
    int last_passed_tier = 0;
    std::optional<double> spin;
    std::optional<TransitionView> screening;
    std::optional<TransitionView> refined;
    std::optional<double> zpl;
    std::optional<CtlSelection> ctl;
    std::optional<double> bes;          // value used by the screen, meV
    std::optional<double> bes_formula;  // meV
    bool bes_flagged = false;
    std::optional<double> hr_total;
    std::optional<StabilityWindow> window;
};

std::optional<TransitionView> computed_transition(const DefectRecord& rec,
                                                  const HostSpec& host,
                                                  const TierConfig& config) {
    auto corrected = rec.level_sets.find(LevelStage::corrected);
    if (corrected == rec.level_sets.end() || !rec.wavefunctions || rec.occupations.empty()) {
        return std::nullopt;
    }
    std::map<Spin, LevelScheme> channels;
    for (const auto& [spin, set] : corrected->second) {
        auto occ_it = rec.occupations.find(spin);
        if (occ_it == rec.occupations.end()) {
            continue;
        }
        LevelScheme scheme;
        scheme.levels = set;
        // Record occupations are indexed by band (base ordering); align them
        // with the sorted corrected slots.
        scheme.occupations.resize(set.eigenvalues.size());
        for (size_t i = 0; i < set.eigenvalues.size(); ++i) {
            int band = set.band_indices.empty() ? static_cast<int>(i) : set.band_indices[i];
            scheme.occupations[i] = occ_it->second[static_cast<size_t>(band)];
        }
        channels[spin] = std::move(scheme);
    }
    if (channels.empty()) {
        return std::nullopt;
    }

    IprContext ipr_ctx;
    for (int d = 0; d < 3; ++d) {
        double l2 = 0.0;
        for (int e = 0; e < 3; ++e) {
            l2 += host.lattice_vectors[static_cast<size_t>(d)][static_cast<size_t>(e)] *
                  host.lattice_vectors[static_cast<size_t>(d)][static_cast<size_t>(e)];
        }
        ipr_ctx.cell_lengths[static_cast<size_t>(d)] = std::sqrt(l2);
    }
    ipr_ctx.grid_points_per_axis = config.ipr_grid_points;
    ipr_ctx.localization_threshold = config.localization_threshold;
    // 3D grids grow cubically; cap the axis resolution there.
    bool three_d = false;
    for (const auto& g : *rec.wavefunctions->basis) {
        if (g[1] != 0.0 || g[2] != 0.0) {
            three_d = true;
            break;
        }
    }
    if (three_d) {
        ipr_ctx.grid_points_per_axis = std::min(ipr_ctx.grid_points_per_axis, 12);
    }

    auto candidates = enumerate_transitions(channels, *rec.wavefunctions,
                                            config.degeneracy_window, ipr_ctx);
    const TransitionCandidate* rep = representative_transition(candidates);
    if (!rep) {
        return std::nullopt;
    }
    return TransitionView{rep->delta_ks, rep->tdm, rep->nature};
}

Verdict evaluate_record(const DefectRecord& rec, const HostSpec& host,
                        const TierConfig& config, const GroupThermo& thermo) {
    Verdict v;
    v.defect_id = rec.defect_id();

    auto eliminate = [&](int tier, std::string reason) {
        v.failed_tier = tier;
        v.reason = std::move(reason);
    };
    auto insufficient = [&](int tier, const std::string& what) {
        eliminate(tier, "insufficient data: " + what);
    };

    // Tier 1: the record's charge must own a stability window.
    if (auto it = thermo.record_errors.find(v.defect_id); it != thermo.record_errors.end()) {
        insufficient(1, it->second);
        return v;
    }
    for (const auto& w : thermo.windows) {
        if (w.charge == rec.charge) {
            v.window = w;
            break;
        }
    }
    if (!v.window) {
        eliminate(1, "unstable charge state (no stability window in the gap)");
        return v;
    }
    v.last_passed_tier = 1;

    // Tier 2: non-singlet ground state.
    if (!rec.occupations.empty()) {
        v.spin = config.spin_from_aufbau ? total_spin_aufbau(rec.occupations)
                                         : total_spin(rec.occupations);
    }
    if (config.require_nonsinglet) {
        if (!v.spin) {
            insufficient(2, "no occupations to assess the total spin");
            return v;
        }
        if (*v.spin < 1e-12) {
            eliminate(2, "singlet ground state (S = 0)");
            return v;
        }
    }
    v.last_passed_tier = 2;

    // Transition data used by tiers 3-5 and the report.
    if (const auto* meta = rec.transition(TransitionStage::screening)) {
        v.screening = TransitionView{meta->delta_ks, meta->tdm, meta->nature};
    } else {
        try {
            v.screening = computed_transition(rec, host, config);
        } catch (const ValidationError&) {
            v.screening = std::nullopt;
        }
    }
    if (const auto* meta = rec.transition(TransitionStage::refined)) {
        v.refined = TransitionView{meta->delta_ks, meta->tdm, meta->nature};
    }

    // Tier 3: screening-stage transition energy and brightness.
    const bool tier3_active = config.min_transition_energy > 0.0 || config.min_tdm > 0.0;
    if (tier3_active) {
        if (!v.screening) {
            insufficient(3, "no screening-stage transition");
            return v;
        }
        if (v.screening->delta_ks < config.min_transition_energy) {
            eliminate(3, "transition energy " + format_ev(v.screening->delta_ks) +
                             " eV below threshold");
            return v;
        }
        if (v.screening->tdm < config.min_tdm) {
            eliminate(3, "TDM " + format_ev(v.screening->tdm) + " D below threshold");
            return v;
        }
    }
    v.last_passed_tier = 3;

    // Tier 4: refined transition energy, where refined data exists.
    if (config.refine_min_delta_ks > 0.0 && v.refined &&
        v.refined->delta_ks < config.refine_min_delta_ks) {
        eliminate(4, "refined transition energy " + format_ev(v.refined->delta_ks) +
                         " eV below threshold");
        return v;
    }
    v.last_passed_tier = 4;

    // Tier 5 data: ZPL and the exciton assessment are gathered before the
    // threshold checks so the report can flag override/formula disagreements
    // even for records eliminated here.
    if (rec.zpl_override) {
        v.zpl = *rec.zpl_override;
    } else if (rec.excited_total_energy) {
        try {
            v.zpl = zero_phonon_line(rec.total_energy, *rec.excited_total_energy);
        } catch (const ValidationError&) {
            v.zpl = std::nullopt;
        }
    }

    const TransitionView* report_transition =
        v.refined ? &*v.refined : (v.screening ? &*v.screening : nullptr);
    bool bes_applicable = report_transition &&
                          report_transition->nature != TransitionNature::intra_defect;
    if (bes_applicable) {
        ExcitonKind kind = report_transition->nature == TransitionNature::donor_bx
                               ? ExcitonKind::donor
                               : ExcitonKind::acceptor;
        v.ctl = select_ctl(thermo.ctls, rec.charge, kind);
        if (v.ctl && v.zpl) {
            try {
                v.bes_formula =
                    bound_exciton_stability(*v.zpl, v.ctl->ctl.level, host, kind);
            } catch (const ValidationError&) {
                v.bes_formula = std::nullopt;
            }
        }
        if (rec.bes_override) {
            v.bes = *rec.bes_override;
            v.bes_flagged =
                !v.bes_formula || std::abs(*v.bes_formula - *rec.bes_override) > kBesAgreementMev;
        } else {
            v.bes = v.bes_formula;
        }
    }

    if (config.min_zpl > 0.0) {
        if (!v.zpl) {
            insufficient(5, "no ZPL (override or excited total energy)");
            return v;
        }
        if (*v.zpl < config.min_zpl) {
            eliminate(5, "ZPL " + format_ev(*v.zpl) + " eV below threshold");
            return v;
        }
    }
    if (config.require_positive_bes && bes_applicable) {
        if (!v.bes) {
            insufficient(5, "no charge transition level for the BES assessment");
            return v;
        }
        if (*v.bes <= 0.0) {
            eliminate(5, "bound exciton unstable (BES <= 0)");
            return v;
        }
    }
    v.last_passed_tier = 5;

    // Huang-Rhys total for the report bundle.
    if (rec.hr_total_override) {
        v.hr_total = *rec.hr_total_override;
    } else if (rec.force_constants && rec.displacement_vector) {
        try {
            Eigen::MatrixXd phi(rec.force_constants->dim, rec.force_constants->dim);
            for (int r = 0; r < rec.force_constants->dim; ++r) {
                for (int c = 0; c < rec.force_constants->dim; ++c) {
                    phi(r, c) = rec.force_constants->at(r, c);
                }
            }
            PhononSet modes = phonon_modes(phi, rec.displacement_vector->masses);
            v.hr_total = partial_hr_factors(modes, rec.displacement_vector->delta_r,
                                            rec.displacement_vector->masses)
                             .total;
        } catch (const ValidationError&) {
            v.hr_total = std::nullopt;
        }
    }
    return v;
}

template <typename F>
void parallel_for(size_t count, int jobs, F&& body) {
    int n_threads = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(count)));
    if (n_threads <= 1) {
        for (size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= count) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) {
        threads.emplace_back(worker);
    }
    for (auto& t : threads) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace

void TierConfig::validate() const {
    if (min_transition_energy < 0.0 || min_tdm < 0.0 || refine_min_delta_ks < 0.0 ||
        min_zpl < 0.0) {
        throw ValidationError("tier config: thresholds must be >= 0");
    }
    if (degeneracy_window < 0.0 || degeneracy_window > 0.2) {
        throw ValidationError("tier config: degeneracy_window must be in [0, 0.2] eV");
    }
    if (ipr_grid_points < 4) {
        throw ValidationError("tier config: ipr_grid_points must be >= 4");
    }
    if (localization_threshold <= 1.0) {
        throw ValidationError("tier config: localization_threshold must be > 1");
    }
}

TierConfig parse_tier_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed config document: ") + e.what());
    }
    TierConfig c;
    auto number = [&](const char* key, double& target) {
        if (auto it = j.find(key); it != j.end()) {
            if (!it->is_number()) {
                throw ValidationError(std::string("config.") + key + ": expected a number");
            }
            target = it->get<double>();
        }
    };
    auto boolean = [&](const char* key, bool& target) {
        if (auto it = j.find(key); it != j.end()) {
            if (!it->is_boolean()) {
                throw ValidationError(std::string("config.") + key + ": expected a boolean");
            }
            target = it->get<bool>();
        }
    };
    number("min_transition_energy", c.min_transition_energy);
    number("min_tdm", c.min_tdm);
    number("refine_min_delta_ks", c.refine_min_delta_ks);
    number("min_zpl", c.min_zpl);
    boolean("require_positive_bes", c.require_positive_bes);
    boolean("require_nonsinglet", c.require_nonsinglet);
    number("degeneracy_window", c.degeneracy_window);
    if (auto it = j.find("lifetime_convention"); it != j.end()) {
        c.lifetime_convention = parse_lifetime_convention(it->get<std::string>());
    }
    if (auto it = j.find("ipr_grid_points"); it != j.end()) {
        c.ipr_grid_points = it->get<int>();
    }
    number("localization_threshold", c.localization_threshold);
    boolean("spin_from_aufbau", c.spin_from_aufbau);
    c.validate();
    return c;
}

std::string serialize_tier_config(const TierConfig& config) {
    json j;
    j["min_transition_energy"] = config.min_transition_energy;
    j["min_tdm"] = config.min_tdm;
    j["refine_min_delta_ks"] = config.refine_min_delta_ks;
    j["min_zpl"] = config.min_zpl;
    j["require_positive_bes"] = config.require_positive_bes;
    j["require_nonsinglet"] = config.require_nonsinglet;
    j["degeneracy_window"] = config.degeneracy_window;
    j["lifetime_convention"] = to_string(config.lifetime_convention);
    j["ipr_grid_points"] = config.ipr_grid_points;
    j["localization_threshold"] = config.localization_threshold;
    j["spin_from_aufbau"] = config.spin_from_aufbau;
    return j.dump(2) + "\n";
}

void ElementSpec::validate() const {
    if (symbol.empty()) {
        throw ValidationError("element spec: empty symbol");
    }
    if (common_oxidation_states.empty()) {
        throw ValidationError("element spec " + symbol + ": oxidation states must be non-empty");
    }
    for (int o : common_oxidation_states) {
        if (o < -4 || o > 7) {
            throw ValidationError("element spec " + symbol + ": oxidation state " +
                                  std::to_string(o) + " outside [-4, +7]");
        }
    }
}

std::vector<ElementSpec> parse_elements(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed elements document: ") + e.what());
    }
    auto it = j.find("elements");
    if (it == j.end() || !it->is_array()) {
        throw ValidationError("elements: missing 'elements' array");
    }
    std::vector<ElementSpec> out;
    for (const auto& je : *it) {
        ElementSpec spec;
        spec.symbol = je.at("symbol").get<std::string>();
        for (const auto& o : je.at("common_oxidation_states")) {
            spec.common_oxidation_states.push_back(o.get<int>());
        }
        if (auto f = je.find("implantable"); f != je.end()) {
            spec.implantable = f->get<bool>();
        }
        spec.validate();
        out.push_back(std::move(spec));
    }
    return out;
}

std::vector<CandidateKey> enumerate_candidates(const std::vector<ElementSpec>& elements,
                                               const std::vector<Site>& sites,
                                               const ChargeRule& rule) {
    if (elements.empty()) {
        throw ValidationError("enumerate_candidates: empty element list");
    }
    std::vector<CandidateKey> out;
    for (const auto& el : elements) {
        el.validate();
        if (!el.implantable) {
            continue;
        }
        for (Site site : sites) {
            std::set<int> base;
            if (site == Site::substitutional) {
                for (int o : el.common_oxidation_states) {
                    base.insert(o - 4);
                }
            } else {
                base.insert(0);
                for (int o : el.common_oxidation_states) {
                    base.insert(o);
                }
            }
            std::set<int> charges;
            for (int q : base) {
                charges.insert(q);
                if (rule.add_neighbors) {
                    charges.insert(q - 1);
                    charges.insert(q + 1);
                }
            }
            for (int q : charges) {
                if (q < rule.q_min || q > rule.q_max) {
                    continue;  // clamped out
                }
                out.push_back({el.symbol, site, q});
            }
        }
    }
    return out;
}

ScreeningReport run_screen(const DefectStore& store, const HostSpec& host,
                           const TierConfig& config, const RunOptions& options) {
    config.validate();
    host.validate();

    ScreeningReport report;
    report.config = config;
    report.host = host;

    std::vector<DefectRecord> records = store.query();
    report.record_count = static_cast<int>(records.size());

    // Group thermodynamics by defect identity.
    std::map<std::string, GroupThermo> groups;
    for (const auto& rec : records) {
        GroupThermo& group = groups[rec.identity()];
        try {
            double corr = correction_for(rec, host);
            group.lines.push_back(formation_line(rec, host, store.chempots(), corr));
        } catch (const ValidationError& e) {
            group.record_errors[rec.defect_id()] = e.what();
        }
    }
    for (auto& [identity, group] : groups) {
        if (!group.lines.empty()) {
            group.windows = stability_windows(group.lines, host);
            for (size_t i = 0; i < group.lines.size(); ++i) {
                for (size_t k = i + 1; k < group.lines.size(); ++k) {
                    group.ctls.push_back(
                        charge_transition_level(group.lines[i], group.lines[k]));
                }
            }
        }
    }

    std::vector<Verdict> verdicts(records.size());
    parallel_for(records.size(), options.jobs, [&](size_t i) {
        const auto& rec = records[i];
        verdicts[i] = evaluate_record(rec, host, config, groups.at(rec.identity()));
    });

    for (int tier = 1; tier <= 5; ++tier) {
        report.tiers.push_back({tier, kTierNames[tier - 1], {}});
    }
    for (size_t i = 0; i < records.size(); ++i) {
        const Verdict& v = verdicts[i];
        for (int tier = 1; tier <= v.last_passed_tier; ++tier) {
            report.tiers[static_cast<size_t>(tier - 1)].survivors.push_back(v.defect_id);
        }
        if (v.failed_tier != 0) {
            report.eliminations.push_back({v.defect_id, v.failed_tier, v.reason});
        }
    }

    for (size_t i = 0; i < records.size(); ++i) {
        const Verdict& v = verdicts[i];
        if (v.bes_flagged && v.bes) {
            report.bes_flags.push_back({v.defect_id, *v.bes, v.bes_formula});
        }
    }

    // Scatter rows: tier-2 survivors with any transition data, refined first.
    for (size_t i = 0; i < records.size(); ++i) {
        const Verdict& v = verdicts[i];
        if (v.last_passed_tier < 2) {
            continue;
        }
        const TransitionView* t = v.refined ? &*v.refined
                                            : (v.screening ? &*v.screening : nullptr);
        if (!t) {
            continue;
        }
        ScatterRow row;
        row.defect_id = v.defect_id;
        row.delta_ks = t->delta_ks;
        row.tdm = t->tdm;
        row.nature = t->nature;
        row.window_width = v.window ? v.window->width() : 0.0;
        LifetimeResult lt = radiative_lifetime(t->delta_ks, t->tdm, host.refractive_index,
                                               config.lifetime_convention);
        row.dark = lt.dark;
        row.lifetime_s = lt.seconds;
        report.scatter.push_back(std::move(row));
    }

    // Finalists with the full property bundle.
    for (size_t i = 0; i < records.size(); ++i) {
        const Verdict& v = verdicts[i];
        if (v.failed_tier != 0) {
            continue;
        }
        FinalCandidate fc;
        fc.defect_id = v.defect_id;
        const TransitionView* t = v.refined ? &*v.refined
                                            : (v.screening ? &*v.screening : nullptr);
        if (t) {
            fc.delta_ks = t->delta_ks;
            fc.tdm = t->tdm;
            fc.nature = t->nature;
            LifetimeResult lt = radiative_lifetime(t->delta_ks, t->tdm, host.refractive_index,
                                                   config.lifetime_convention);
            fc.dark = lt.dark;
            fc.lifetime_s = lt.seconds;
        }
        fc.zpl = v.zpl.value_or(0.0);
        if (v.ctl) {
            fc.ctl = v.ctl->ctl.level;
            fc.ctl_label = v.ctl->ctl.label();
            fc.ctl_fallback = v.ctl->fallback;
        }
        fc.bes = v.bes.value_or(0.0);
        fc.bes_formula = v.bes_formula;
        fc.bes_flagged = v.bes_flagged;
        fc.total_spin = v.spin.value_or(0.0);
        fc.hr_total = v.hr_total;
        if (v.window) {
            fc.window_lo = v.window->fermi_lo;
            fc.window_hi = v.window->fermi_hi;
        }
        report.finalists.push_back(std::move(fc));
    }
    std::sort(report.finalists.begin(), report.finalists.end(),
              [](const FinalCandidate& a, const FinalCandidate& b) {
                  if (a.tdm != b.tdm) {
                      return a.tdm > b.tdm;
                  }
                  if (a.zpl != b.zpl) {
                      return a.zpl > b.zpl;
                  }
                  return a.defect_id < b.defect_id;
              });
    return report;
}

}  // namespace qds
