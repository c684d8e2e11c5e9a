#include "qds/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "qds/error.hpp"
#include "qds/units.hpp"

namespace qds {

using nlohmann::json;

namespace {

std::string num(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

const std::array<double, 4> kIsolinesUs = {0.01, 0.1, 1.0, 10.0};

json config_to_json(const TierConfig& c) {
    return json::parse(serialize_tier_config(c));
}

json host_to_json(const HostSpec& h) {
    return json::parse(serialize_host(h));
}

std::string svg_header(int w, int h) {
    std::ostringstream ss;
    ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
       << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    return ss.str();
}

const char* nature_color(TransitionNature n) {
    switch (n) {
        case TransitionNature::donor_bx: return "#d62728";
        case TransitionNature::acceptor_bx: return "#1f77b4";
        case TransitionNature::intra_defect: return "#2ca02c";
    }
    return "black";
}

}  // namespace

double tdm_for_lifetime(double energy_ev, double lifetime_s, double refractive_index,
                        LifetimeConvention convention) {
    if (!(energy_ev > 0.0) || !(lifetime_s > 0.0)) {
        throw ValidationError("tdm_for_lifetime: energy and lifetime must be > 0");
    }
    const double nu = energy_ev * kUnits.ev_in_joule / kUnits.planck_h;
    const double c3 = std::pow(kUnits.speed_of_light, 3);
    double k = refractive_index * std::pow(2.0 * kPi, 3) * std::pow(nu, 3) /
               (3.0 * kUnits.vacuum_permittivity * kUnits.planck_h * c3);
    if (convention == LifetimeConvention::einstein) {
        k *= 2.0;
    }
    double mu_cm = std::sqrt(1.0 / (lifetime_s * k));
    return mu_cm / kUnits.debye_in_coulomb_meter;
}

std::string serialize_report(const ScreeningReport& report) {
    json j;
    j["schema"] = 1;
    j["config"] = config_to_json(report.config);
    j["host"] = host_to_json(report.host);
    j["record_count"] = report.record_count;
    json jt = json::array();
    for (const auto& t : report.tiers) {
        json e;
        e["tier"] = t.tier;
        e["name"] = t.name;
        e["survivors"] = t.survivors;
        jt.push_back(std::move(e));
    }
    j["tiers"] = std::move(jt);
    json je = json::array();
    for (const auto& e : report.eliminations) {
        json x;
        x["defect_id"] = e.defect_id;
        x["tier"] = e.tier;
        x["reason"] = e.reason;
        je.push_back(std::move(x));
    }
    j["eliminations"] = std::move(je);
    json jf = json::array();
    for (const auto& f : report.finalists) {
        json x;
        x["defect_id"] = f.defect_id;
        x["delta_ks"] = f.delta_ks;
        x["zpl"] = f.zpl;
        x["tdm"] = f.tdm;
        x["dark"] = f.dark;
        if (!f.dark) {
            x["lifetime_s"] = f.lifetime_s;
        }
        x["ctl"] = f.ctl;
        x["ctl_label"] = f.ctl_label;
        x["ctl_fallback"] = f.ctl_fallback;
        x["bes"] = f.bes;
        if (f.bes_formula) {
            x["bes_formula"] = *f.bes_formula;
        }
        x["bes_flagged"] = f.bes_flagged;
        x["total_spin"] = f.total_spin;
        x["nature"] = to_string(f.nature);
        if (f.hr_total) {
            x["hr_total"] = *f.hr_total;
        }
        x["window_lo"] = f.window_lo;
        x["window_hi"] = f.window_hi;
        jf.push_back(std::move(x));
    }
    j["finalists"] = std::move(jf);
    json js = json::array();
    for (const auto& s : report.scatter) {
        json x;
        x["defect_id"] = s.defect_id;
        x["delta_ks"] = s.delta_ks;
        x["tdm"] = s.tdm;
        x["nature"] = to_string(s.nature);
        x["window_width"] = s.window_width;
        x["dark"] = s.dark;
        if (!s.dark) {
            x["lifetime_s"] = s.lifetime_s;
        }
        js.push_back(std::move(x));
    }
    j["scatter"] = std::move(js);
    json jb = json::array();
    for (const auto& b : report.bes_flags) {
        json x;
        x["defect_id"] = b.defect_id;
        x["bes_override"] = b.bes_override;
        if (b.bes_formula) {
            x["bes_formula"] = *b.bes_formula;
        }
        jb.push_back(std::move(x));
    }
    j["bes_flags"] = std::move(jb);
    return j.dump(2) + "\n";
}

ScreeningReport parse_report(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed report document: ") + e.what());
    }
    ScreeningReport r;
    r.config = parse_tier_config(j.at("config").dump());
    r.host = parse_host(j.at("host").dump());
    r.record_count = j.at("record_count").get<int>();
    for (const auto& t : j.at("tiers")) {
        TierSummary ts;
        ts.tier = t.at("tier").get<int>();
        ts.name = t.at("name").get<std::string>();
        for (const auto& s : t.at("survivors")) {
            ts.survivors.push_back(s.get<std::string>());
        }
        r.tiers.push_back(std::move(ts));
    }
    for (const auto& e : j.at("eliminations")) {
        r.eliminations.push_back({e.at("defect_id").get<std::string>(),
                                  e.at("tier").get<int>(),
                                  e.at("reason").get<std::string>()});
    }
    for (const auto& f : j.at("finalists")) {
        FinalCandidate fc;
        fc.defect_id = f.at("defect_id").get<std::string>();
        fc.delta_ks = f.at("delta_ks").get<double>();
        fc.zpl = f.at("zpl").get<double>();
        fc.tdm = f.at("tdm").get<double>();
        fc.dark = f.at("dark").get<bool>();
        fc.lifetime_s = fc.dark ? std::numeric_limits<double>::infinity()
                                : f.at("lifetime_s").get<double>();
        fc.ctl = f.at("ctl").get<double>();
        fc.ctl_label = f.at("ctl_label").get<std::string>();
        fc.ctl_fallback = f.at("ctl_fallback").get<bool>();
        fc.bes = f.at("bes").get<double>();
        if (auto it = f.find("bes_formula"); it != f.end()) {
            fc.bes_formula = it->get<double>();
        }
        fc.bes_flagged = f.at("bes_flagged").get<bool>();
        fc.total_spin = f.at("total_spin").get<double>();
        fc.nature = parse_transition_nature(f.at("nature").get<std::string>());
        if (auto it = f.find("hr_total"); it != f.end()) {
            fc.hr_total = it->get<double>();
        }
        fc.window_lo = f.at("window_lo").get<double>();
        fc.window_hi = f.at("window_hi").get<double>();
        r.finalists.push_back(std::move(fc));
    }
    for (const auto& s : j.at("scatter")) {
        ScatterRow row;
        row.defect_id = s.at("defect_id").get<std::string>();
        row.delta_ks = s.at("delta_ks").get<double>();
        row.tdm = s.at("tdm").get<double>();
        row.nature = parse_transition_nature(s.at("nature").get<std::string>());
        row.window_width = s.at("window_width").get<double>();
        row.dark = s.at("dark").get<bool>();
        row.lifetime_s = row.dark ? std::numeric_limits<double>::infinity()
                                  : s.at("lifetime_s").get<double>();
        r.scatter.push_back(std::move(row));
    }
    if (auto it = j.find("bes_flags"); it != j.end()) {
        for (const auto& b : *it) {
            BesFlag flag;
            flag.defect_id = b.at("defect_id").get<std::string>();
            flag.bes_override = b.at("bes_override").get<double>();
            if (auto f = b.find("bes_formula"); f != b.end()) {
                flag.bes_formula = f->get<double>();
            }
            r.bes_flags.push_back(std::move(flag));
        }
    }
    return r;
}

ReportDocuments emit_report(const ScreeningReport& report, const ReportOptions& options) {
    ReportDocuments out;
    out.report_json = serialize_report(report);

    {
        std::ostringstream ss;
        ss << "screening summary\n";
        ss << "  records: " << report.record_count << "\n";
        int prev = report.record_count;
        for (const auto& t : report.tiers) {
            ss << "  tier " << t.tier << " (" << t.name << "): " << prev << " -> "
               << t.survivors.size() << "\n";
            prev = static_cast<int>(t.survivors.size());
        }
        ss << "finalists (" << report.finalists.size() << "):\n";
        int rank = 1;
        for (const auto& f : report.finalists) {
            ss << "  " << rank++ << ". " << f.defect_id << "  tdm=" << num(f.tdm)
               << " D  zpl=" << num(f.zpl) << " eV  dKS=" << num(f.delta_ks)
               << " eV  ctl=" << num(f.ctl) << " eV " << f.ctl_label
               << (f.ctl_fallback ? " [fallback]" : "") << "  bes=" << num(f.bes) << " meV"
               << (f.bes_flagged ? " [inconsistent with formula" +
                                       (f.bes_formula ? " " + num(*f.bes_formula) + " meV" : "") +
                                       "]"
                                 : "")
               << "  S=" << num(f.total_spin) << "  nature=" << to_string(f.nature);
            if (!f.dark) {
                ss << "  tau=" << num(f.lifetime_s) << " s";
            } else {
                ss << "  tau=dark";
            }
            if (f.hr_total) {
                ss << "  S_hr=" << num(*f.hr_total);
            }
            ss << "\n";
        }
        if (!report.bes_flags.empty()) {
            ss << "BES inconsistencies (ingested value vs CTL/ZPL formula):\n";
            for (const auto& b : report.bes_flags) {
                ss << "  " << b.defect_id << "  ingested " << num(b.bes_override) << " meV vs "
                   << (b.bes_formula ? num(*b.bes_formula) + " meV" : "no formula value")
                   << "\n";
            }
        }
        if (!report.eliminations.empty()) {
            ss << "eliminations:\n";
            for (const auto& e : report.eliminations) {
                ss << "  " << e.defect_id << "  tier " << e.tier << ": " << e.reason << "\n";
            }
        }
        out.summary_text = ss.str();
    }

    {
        std::ostringstream ss;
        ss << "defect_id,delta_ks_eV,zpl_eV,tdm_debye,lifetime_s,ctl_eV,ctl_label,"
              "bes_meV,bes_flagged,total_spin,nature,hr_total,window_lo_eV,window_hi_eV\n";
        for (const auto& f : report.finalists) {
            ss << f.defect_id << ',' << num(f.delta_ks) << ',' << num(f.zpl) << ','
               << num(f.tdm) << ',' << (f.dark ? "inf" : num(f.lifetime_s)) << ','
               << num(f.ctl) << ',' << f.ctl_label << ',' << num(f.bes) << ','
               << (f.bes_flagged ? 1 : 0) << ',' << num(f.total_spin) << ','
               << to_string(f.nature) << ',' << (f.hr_total ? num(*f.hr_total) : "") << ','
               << num(f.window_lo) << ',' << num(f.window_hi) << '\n';
        }
        out.finalists_csv = ss.str();
    }

    {
        std::ostringstream ss;
        ss << "delta_ks_eV,tdm_debye,nature,stability_window_width,lifetime_s,defect_id\n";
        for (const auto& s : report.scatter) {
            ss << num(s.delta_ks) << ',' << num(s.tdm) << ',' << to_string(s.nature) << ','
               << num(s.window_width) << ',' << (s.dark ? "inf" : num(s.lifetime_s)) << ','
               << s.defect_id << '\n';
        }
        out.scatter_csv = ss.str();
    }

    {
        double max_tdm = 0.0;
        for (const auto& s : report.scatter) {
            max_tdm = std::max(max_tdm, s.tdm);
        }
        const double bin = 0.5;
        int n_bins = std::max(1, static_cast<int>(std::ceil(max_tdm / bin + 1e-12)));
        std::vector<std::array<int, 3>> counts(static_cast<size_t>(n_bins), {0, 0, 0});
        for (const auto& s : report.scatter) {
            int b = std::min(n_bins - 1, static_cast<int>(s.tdm / bin));
            counts[static_cast<size_t>(b)][static_cast<size_t>(s.nature)]++;
        }
        std::ostringstream ss;
        ss << "bin_lo_debye,bin_hi_debye,donor_bx,acceptor_bx,intra_defect\n";
        for (int b = 0; b < n_bins; ++b) {
            ss << num(b * bin) << ',' << num((b + 1) * bin) << ','
               << counts[static_cast<size_t>(b)][0] << ','
               << counts[static_cast<size_t>(b)][1] << ','
               << counts[static_cast<size_t>(b)][2] << '\n';
        }
        out.histogram_csv = ss.str();
    }

    {
        std::ostringstream ss;
        ss << "tau_us,energy_eV,mu_debye\n";
        for (double tau_us : kIsolinesUs) {
            for (double e = options.isoline_e_min; e <= options.isoline_e_max + 1e-12;
                 e += 0.02) {
                double mu = tdm_for_lifetime(e, tau_us * 1e-6, report.host.refractive_index,
                                             report.config.lifetime_convention);
                ss << num(tau_us) << ',' << num(e) << ',' << num(mu) << '\n';
            }
        }
        out.isolines_csv = ss.str();
    }

    if (options.svg) {
        // Scatter: TDM vs transition energy with lifetime isolines.
        const int w = 640;
        const int h = 480;
        const int m = 50;
        double e_lo = options.isoline_e_min;
        double e_hi = options.isoline_e_max;
        double mu_hi = 6.0;
        for (const auto& s : report.scatter) {
            mu_hi = std::max(mu_hi, s.tdm * 1.1);
        }
        auto px = [&](double e) { return m + (e - e_lo) / (e_hi - e_lo) * (w - 2 * m); };
        auto py = [&](double mu) { return h - m - mu / mu_hi * (h - 2 * m); };
        std::ostringstream ss;
        ss << svg_header(w, h);
        ss << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << w - 2 * m
           << "\" height=\"" << h - 2 * m << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (double tau_us : kIsolinesUs) {
            ss << "<polyline fill=\"none\" stroke=\"#bbbbbb\" points=\"";
            for (double e = e_lo; e <= e_hi + 1e-12; e += 0.02) {
                double mu = tdm_for_lifetime(e, tau_us * 1e-6, report.host.refractive_index,
                                             report.config.lifetime_convention);
                if (mu <= mu_hi) {
                    ss << px(e) << ',' << py(mu) << ' ';
                }
            }
            ss << "\"/>\n";
        }
        for (const auto& s : report.scatter) {
            if (s.delta_ks < e_lo || s.delta_ks > e_hi || s.tdm > mu_hi) {
                continue;
            }
            ss << "<circle cx=\"" << px(s.delta_ks) << "\" cy=\"" << py(s.tdm)
               << "\" r=\"4\" fill=\"" << nature_color(s.nature) << "\"/>\n";
        }
        ss << "<text x=\"" << w / 2 << "\" y=\"" << h - 12
           << "\" text-anchor=\"middle\" font-size=\"12\">transition energy (eV)</text>\n";
        ss << "<text x=\"14\" y=\"" << h / 2
           << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
           << h / 2 << ")\">TDM (Debye)</text>\n";
        ss << "</svg>\n";
        out.scatter_svg = ss.str();

        // Histogram: stacked counts per nature.
        std::istringstream hist(out.histogram_csv);
        std::string line;
        std::getline(hist, line);  // header
        struct Bin {
            double lo, hi;
            int c[3];
        };
        std::vector<Bin> bins;
        int peak = 1;
        while (std::getline(hist, line)) {
            Bin b{};
            std::sscanf(line.c_str(), "%lf,%lf,%d,%d,%d", &b.lo, &b.hi, &b.c[0], &b.c[1],
                        &b.c[2]);
            peak = std::max(peak, b.c[0] + b.c[1] + b.c[2]);
            bins.push_back(b);
        }
        std::ostringstream hs;
        hs << svg_header(w, h);
        double bw = static_cast<double>(w - 2 * m) / std::max<size_t>(1, bins.size());
        for (size_t i = 0; i < bins.size(); ++i) {
            double x = m + static_cast<double>(i) * bw;
            double y = h - m;
            for (int n = 0; n < 3; ++n) {
                double bh = static_cast<double>(bins[i].c[n]) / peak * (h - 2 * m);
                y -= bh;
                if (bins[i].c[n] > 0) {
                    hs << "<rect x=\"" << x + 1 << "\" y=\"" << y << "\" width=\"" << bw - 2
                       << "\" height=\"" << bh << "\" fill=\""
                       << nature_color(static_cast<TransitionNature>(n)) << "\"/>\n";
                }
            }
        }
        hs << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << w - 2 * m
           << "\" height=\"" << h - 2 * m << "\" fill=\"none\" stroke=\"black\"/>\n";
        hs << "<text x=\"" << w / 2 << "\" y=\"" << h - 12
           << "\" text-anchor=\"middle\" font-size=\"12\">TDM (Debye), 0.5 D bins</text>\n";
        hs << "</svg>\n";
        out.histogram_svg = hs.str();
    }
    return out;
}

}  // namespace qds
