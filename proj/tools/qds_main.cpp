// qds: command-line front end for the tiered defect-screening engine.
//
// Exit codes: 0 success, 1 usage, 2 validation failure, 3 zero finalists,
// 4 I/O failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qds/error.hpp"
#include "qds/lineshape.hpp"
#include "qds/model_lab.hpp"
#include "qds/pipeline.hpp"
#include "qds/report.hpp"
#include "qds/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNoFinalists = 3;
constexpr int kExitIo = 4;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw qds::IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw qds::IoError("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw qds::IoError("write failed for " + path.string());
    }
}

qds::DefectStore open_or_create_store(const std::string& store_path,
                                      const std::string& host_path,
                                      const std::string& chempots_path) {
    if (qds::DefectStore::exists(store_path)) {
        return qds::DefectStore::open(store_path);
    }
    if (host_path.empty() || chempots_path.empty()) {
        throw qds::ValidationError(
            "store does not exist; --host and --chempots are required to create it");
    }
    return qds::DefectStore::create(store_path, qds::parse_host(read_file(host_path)),
                                    qds::parse_chempots(read_file(chempots_path)));
}

qds::WellModelSpec parse_well_spec(const json& j) {
    qds::WellModelSpec w;
    if (auto it = j.find("dimension"); it != j.end()) w.dimension = it->get<int>();
    if (auto it = j.find("cell_length"); it != j.end()) w.cell_length = it->get<double>();
    if (auto it = j.find("basis_cutoff"); it != j.end()) w.basis_cutoff = it->get<int>();
    if (auto it = j.find("effective_mass"); it != j.end()) w.effective_mass = it->get<double>();
    if (auto it = j.find("host_potential_amplitude"); it != j.end())
        w.host_potential_amplitude = it->get<double>();
    if (auto it = j.find("defect_depth"); it != j.end()) w.defect_depth = it->get<double>();
    if (auto it = j.find("defect_width"); it != j.end()) w.defect_width = it->get<double>();
    if (auto it = j.find("refined_scale"); it != j.end()) w.refined_scale = it->get<double>();
    if (auto it = j.find("electrons_up"); it != j.end()) w.electrons_up = it->get<int>();
    if (auto it = j.find("electrons_down"); it != j.end()) w.electrons_down = it->get<int>();
    w.validate();
    return w;
}

std::vector<qds::CorpusEntry> parse_gen_entries(const json& j) {
    std::vector<qds::CorpusEntry> entries;
    if (auto it = j.find("randomized_count"); it != j.end()) {
        unsigned long long seed = 1;
        if (auto s = j.find("seed"); s != j.end()) {
            seed = s->get<unsigned long long>();
        }
        entries = qds::randomized_entries(seed, it->get<int>());
    }
    if (auto it = j.find("entries"); it != j.end()) {
        for (const auto& je : *it) {
            qds::CorpusEntry entry;
            if (auto f = je.find("element"); f != je.end()) {
                entry.element = f->get<std::string>();
            }
            if (auto f = je.find("site"); f != je.end()) {
                entry.site = qds::parse_site(f->get<std::string>());
            }
            if (auto f = je.find("charges"); f != je.end()) {
                entry.emit_charges.clear();
                for (const auto& q : *f) {
                    entry.emit_charges.push_back(q.get<int>());
                }
            }
            entry.well = parse_well_spec(je.at("well"));
            if (auto f = je.find("config_coord"); f != je.end()) {
                qds::ConfigCoordSpec cc;
                cc.base = entry.well;
                if (auto g = f->find("spring_k"); g != f->end()) cc.spring_k = g->get<double>();
                if (auto g = f->find("coupling"); g != f->end()) cc.coupling = g->get<double>();
                if (auto g = f->find("mode_mass"); g != f->end()) cc.mode_mass = g->get<double>();
                if (auto g = f->find("transverse_k"); g != f->end())
                    cc.transverse_k = g->get<double>();
                entry.config_coord = cc;
            }
            entries.push_back(std::move(entry));
        }
    }
    if (entries.empty()) {
        throw qds::ValidationError("model spec: no entries (need 'entries' or 'randomized_count')");
    }
    return entries;
}

qds::ModelHostConfig parse_model_host(const json& j) {
    qds::ModelHostConfig cfg;
    if (auto it = j.find("host"); it != j.end()) {
        const json& h = *it;
        if (auto f = h.find("band_gap"); f != h.end()) cfg.band_gap = f->get<double>();
        if (auto f = h.find("refractive_index"); f != h.end())
            cfg.refractive_index = f->get<double>();
        if (auto f = h.find("dielectric_constant"); f != h.end())
            cfg.dielectric_constant = f->get<double>();
        if (auto f = h.find("vbm_shift"); f != h.end()) cfg.vbm_shift = f->get<double>();
    }
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"tiered screening of defect candidates for spin-photon interfaces"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate and store defect records");
    std::string in_store, in_host, in_chempots;
    std::vector<std::string> in_files;
    ingest->add_option("--store", in_store, "store directory")->required();
    ingest->add_option("--host", in_host, "host spec (required when creating a store)");
    ingest->add_option("--chempots", in_chempots, "chemical potentials");
    ingest->add_option("files", in_files, "record documents")->required();

    // screen
    auto* screen = app.add_subcommand("screen", "run the tiered screen and write reports");
    std::string sc_store, sc_config, sc_out = "screen-out", sc_convention, sc_format = "text";
    int sc_jobs = 0;
    bool sc_svg = false;
    screen->add_option("--store", sc_store, "store directory")->required();
    screen->add_option("--config", sc_config, "tier config document");
    screen->add_option("--out", sc_out, "output directory");
    screen->add_option("--jobs", sc_jobs, "parallelism degree (default: cores)");
    screen->add_option("--convention", sc_convention, "lifetime convention")
        ->check(CLI::IsMember({"as_printed", "einstein"}));
    screen->add_option("--format", sc_format, "stdout format")
        ->check(CLI::IsMember({"text", "json", "csv"}));
    screen->add_flag("--svg", sc_svg, "also emit SVG plots");

    // report
    auto* report_cmd = app.add_subcommand("report", "re-emit formats from a stored report");
    std::string rp_input, rp_out = "report-out", rp_format = "text";
    bool rp_svg = false;
    report_cmd->add_option("--input", rp_input, "report.json produced by screen")->required();
    report_cmd->add_option("--out", rp_out, "output directory");
    report_cmd->add_option("--format", rp_format, "stdout format")
        ->check(CLI::IsMember({"text", "json", "csv"}));
    report_cmd->add_flag("--svg", rp_svg, "also emit SVG plots");

    // thermo diagram
    auto* thermo = app.add_subcommand("thermo", "thermodynamic outputs");
    thermo->require_subcommand(1);
    auto* diagram = thermo->add_subcommand("diagram", "formation-energy diagram CSV");
    std::string th_store, th_defect, th_out;
    int th_samples = 200;
    diagram->add_option("--store", th_store, "store directory")->required();
    diagram->add_option("--defect", th_defect, "defect identity, e.g. Fe:tet_interstitial")
        ->required();
    diagram->add_option("--out", th_out, "output CSV path")->required();
    diagram->add_option("--samples", th_samples, "Fermi-level samples (default 200)");

    // lineshape
    auto* lineshape = app.add_subcommand("lineshape", "phonon-sideband emission spectrum");
    std::string ls_record, ls_out, ls_summary;
    double ls_broadening = 2.0, ls_zpl = 0.0, ls_emin = 0.0, ls_emax = 0.0, ls_step = 5e-5;
    lineshape->add_option("--record", ls_record, "record with force constants and displacement")
        ->required();
    lineshape->add_option("--out", ls_out, "spectrum CSV path")->required();
    lineshape->add_option("--summary", ls_summary, "sidecar summary JSON path");
    lineshape->add_option("--broadening", ls_broadening, "Gaussian sigma in meV (default 2)");
    lineshape->add_option("--zpl", ls_zpl, "override the ZPL energy (eV)");
    lineshape->add_option("--emin", ls_emin, "grid start (eV)");
    lineshape->add_option("--emax", ls_emax, "grid end (eV)");
    lineshape->add_option("--step", ls_step, "grid step (eV, default 5e-5)");

    // model
    auto* model = app.add_subcommand("model", "synthetic model-lab utilities");
    model->require_subcommand(1);
    auto* gen = model->add_subcommand("gen", "generate records from a model spec");
    std::string mg_spec, mg_out = "model-out";
    gen->add_option("--spec", mg_spec, "model spec document")->required();
    gen->add_option("--out", mg_out, "output directory");
    auto* enumerate = model->add_subcommand("enumerate", "candidate (element, site, charge) list");
    std::string me_elements;
    bool me_no_neighbors = false;
    std::vector<std::string> me_sites = {"substitutional", "tet_interstitial",
                                         "hex_interstitial"};
    enumerate->add_option("--elements", me_elements, "element config document")->required();
    enumerate->add_flag("--no-neighbors", me_no_neighbors, "disable the q +/- 1 neighbor rule");
    enumerate->add_option("--sites", me_sites, "sites to enumerate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (*ingest) {
        qds::DefectStore store = open_or_create_store(in_store, in_host, in_chempots);
        for (const auto& file : in_files) {
            qds::DefectRecord rec = qds::parse_record(read_file(file));
            std::string id = store.put(rec);
            std::cout << "stored " << id << "\n";
        }
        return kExitOk;
    }

    if (*screen) {
        qds::DefectStore store = qds::DefectStore::open(sc_store);
        qds::TierConfig config;
        if (!sc_config.empty()) {
            config = qds::parse_tier_config(read_file(sc_config));
        }
        if (!sc_convention.empty()) {
            config.lifetime_convention = qds::parse_lifetime_convention(sc_convention);
        }
        qds::RunOptions options;
        options.jobs = sc_jobs;
        qds::ScreeningReport result = qds::run_screen(store, store.host(), config, options);

        qds::ReportOptions ropt;
        ropt.svg = sc_svg;
        qds::ReportDocuments docs = qds::emit_report(result, ropt);
        fs::path out(sc_out);
        write_file(out / "summary.txt", docs.summary_text);
        write_file(out / "report.json", docs.report_json);
        write_file(out / "finalists.csv", docs.finalists_csv);
        write_file(out / "scatter.csv", docs.scatter_csv);
        write_file(out / "tdm_histogram.csv", docs.histogram_csv);
        write_file(out / "lifetime_isolines.csv", docs.isolines_csv);
        if (docs.scatter_svg) {
            write_file(out / "scatter.svg", *docs.scatter_svg);
        }
        if (docs.histogram_svg) {
            write_file(out / "tdm_histogram.svg", *docs.histogram_svg);
        }
        if (sc_format == "json") {
            std::cout << docs.report_json;
        } else if (sc_format == "csv") {
            std::cout << docs.finalists_csv;
        } else {
            std::cout << docs.summary_text;
        }
        return result.finalists.empty() ? kExitNoFinalists : kExitOk;
    }

    if (*report_cmd) {
        qds::ScreeningReport result = qds::parse_report(read_file(rp_input));
        qds::ReportOptions ropt;
        ropt.svg = rp_svg;
        qds::ReportDocuments docs = qds::emit_report(result, ropt);
        fs::path out(rp_out);
        write_file(out / "summary.txt", docs.summary_text);
        write_file(out / "finalists.csv", docs.finalists_csv);
        write_file(out / "scatter.csv", docs.scatter_csv);
        write_file(out / "tdm_histogram.csv", docs.histogram_csv);
        write_file(out / "lifetime_isolines.csv", docs.isolines_csv);
        if (docs.scatter_svg) {
            write_file(out / "scatter.svg", *docs.scatter_svg);
        }
        if (docs.histogram_svg) {
            write_file(out / "tdm_histogram.svg", *docs.histogram_svg);
        }
        if (rp_format == "json") {
            std::cout << docs.report_json;
        } else if (rp_format == "csv") {
            std::cout << docs.finalists_csv;
        } else {
            std::cout << docs.summary_text;
        }
        return kExitOk;
    }

    if (*thermo) {
        qds::DefectStore store = qds::DefectStore::open(th_store);
        auto colon = th_defect.find(':');
        if (colon == std::string::npos) {
            throw qds::ValidationError("--defect must be <element>:<site>");
        }
        qds::DefectStore::Filter filter;
        filter.element = th_defect.substr(0, colon);
        filter.site = qds::parse_site(th_defect.substr(colon + 1));
        std::vector<qds::DefectRecord> records = store.query(filter);
        if (records.empty()) {
            throw qds::ValidationError("no records for defect " + th_defect);
        }
        if (th_samples < 2) {
            throw qds::ValidationError("--samples must be >= 2");
        }
        std::vector<qds::FormationLine> lines;
        for (const auto& rec : records) {
            lines.push_back(qds::formation_line(rec, store.host(), store.chempots(),
                                                qds::correction_for(rec, store.host())));
        }
        std::sort(lines.begin(), lines.end(),
                  [](const auto& a, const auto& b) { return a.charge < b.charge; });
        std::ostringstream csv;
        csv << "fermi_eV";
        for (const auto& line : lines) {
            csv << ",eform_q" << (line.charge > 0 ? "+" : "") << line.charge << "_eV";
        }
        csv << "\n";
        const double eg = store.host().band_gap;
        for (int i = 0; i < th_samples; ++i) {
            double ef = eg * i / (th_samples - 1);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.9g", ef);
            csv << buf;
            for (const auto& line : lines) {
                std::snprintf(buf, sizeof(buf), "%.9g", line.intercept + line.charge * ef);
                csv << ',' << buf;
            }
            csv << "\n";
        }
        write_file(th_out, csv.str());
        std::cout << "wrote " << th_out << "\n";
        return kExitOk;
    }

    if (*lineshape) {
        qds::DefectRecord rec = qds::parse_record(read_file(ls_record));
        if (!rec.force_constants || !rec.displacement_vector) {
            throw qds::ValidationError(
                "record lacks force_constants or displacement_vector for a lineshape");
        }
        double zpl = ls_zpl;
        if (zpl <= 0.0) {
            if (rec.zpl_override) {
                zpl = *rec.zpl_override;
            } else if (rec.excited_total_energy) {
                zpl = qds::zero_phonon_line(rec.total_energy, *rec.excited_total_energy);
            } else {
                throw qds::ValidationError("no ZPL available; pass --zpl");
            }
        }
        Eigen::MatrixXd phi(rec.force_constants->dim, rec.force_constants->dim);
        for (int r = 0; r < rec.force_constants->dim; ++r) {
            for (int c = 0; c < rec.force_constants->dim; ++c) {
                phi(r, c) = rec.force_constants->at(r, c);
            }
        }
        qds::PhononSet modes = qds::phonon_modes(phi, rec.displacement_vector->masses);
        qds::HuangRhysDecomposition hr = qds::partial_hr_factors(
            modes, rec.displacement_vector->delta_r, rec.displacement_vector->masses);
        qds::LineshapeGrid grid;
        grid.step = ls_step;
        if (ls_emax > ls_emin && ls_emax > 0.0) {
            grid.e_min = ls_emin;
            grid.e_max = ls_emax;
            grid.explicit_range = true;
        }
        qds::LineshapeResult spectrum = qds::pl_lineshape(hr, modes, zpl, ls_broadening, grid);
        std::ostringstream csv;
        csv << "energy_eV,intensity\n";
        for (size_t i = 0; i < spectrum.energies.size(); ++i) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", spectrum.energies[i],
                          spectrum.intensity[i]);
            csv << buf;
        }
        write_file(ls_out, csv.str());
        json summary;
        summary["s_total"] = hr.total;
        summary["zpl_weight"] = spectrum.zpl_weight;
        summary["zpl_eV"] = spectrum.zpl_position;
        summary["broadening_meV"] = spectrum.broadening;
        if (!ls_summary.empty()) {
            write_file(ls_summary, summary.dump(2) + "\n");
        }
        std::cout << summary.dump(2) << "\n";
        return kExitOk;
    }

    if (*model) {
        if (*gen) {
            json spec = json::parse(read_file(mg_spec));
            std::vector<qds::CorpusEntry> entries = parse_gen_entries(spec);
            qds::ModelHostConfig host_cfg = parse_model_host(spec);
            qds::GeneratedCorpus corpus = qds::generate_corpus(entries, host_cfg);
            fs::path out(mg_out);
            write_file(out / "host.json", qds::serialize_host(corpus.host));
            write_file(out / "chempots.json", qds::serialize_chempots(corpus.chempots));
            for (const auto& rec : corpus.records) {
                write_file(out / "records" / (rec.defect_id() + ".json"),
                           qds::serialize_record(rec));
            }
            std::cout << "generated " << corpus.records.size() << " records in " << mg_out
                      << "\n";
            return kExitOk;
        }
        // enumerate
        std::vector<qds::ElementSpec> elements = qds::parse_elements(read_file(me_elements));
        std::vector<qds::Site> sites;
        for (const auto& s : me_sites) {
            sites.push_back(qds::parse_site(s));
        }
        qds::ChargeRule rule;
        rule.add_neighbors = !me_no_neighbors;
        std::cout << "element,site,charge\n";
        for (const auto& c : qds::enumerate_candidates(elements, sites, rule)) {
            std::cout << c.element << ',' << qds::to_string(c.site) << ',' << c.charge << "\n";
        }
        return kExitOk;
    }

    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const qds::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const qds::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}
