#include "qds/records.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "qds/error.hpp"

namespace qds {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

[[noreturn]] void fail(const std::string& ctx, const std::string& msg) {
    throw ValidationError(ctx + ": " + msg);
}

const json& require_field(const json& j, const char* key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) {
        fail(ctx + "." + key, "missing required field");
    }
    return *it;
}

double as_finite_number(const json& j, const std::string& ctx) {
    if (!j.is_number()) {
        fail(ctx, "expected a number");
    }
    double v = j.get<double>();
    if (!std::isfinite(v)) {
        fail(ctx, "non-finite value");
    }
    return v;
}

int as_int(const json& j, const std::string& ctx) {
    if (!j.is_number_integer()) {
        fail(ctx, "expected an integer");
    }
    return j.get<int>();
}

std::string as_string(const json& j, const std::string& ctx) {
    if (!j.is_string()) {
        fail(ctx, "expected a string");
    }
    return j.get<std::string>();
}

std::vector<double> as_number_array(const json& j, const std::string& ctx) {
    if (!j.is_array()) {
        fail(ctx, "expected an array");
    }
    std::vector<double> out;
    out.reserve(j.size());
    for (size_t i = 0; i < j.size(); ++i) {
        out.push_back(as_finite_number(j[i], ctx + "[" + std::to_string(i) + "]"));
    }
    return out;
}

Vec3 as_vec3(const json& j, const std::string& ctx) {
    auto v = as_number_array(j, ctx);
    if (v.size() != 3) {
        fail(ctx, "expected 3 components");
    }
    return {v[0], v[1], v[2]};
}

EnergyLevelSet parse_level_set(const json& j, const std::string& ctx) {
    if (!j.is_object()) {
        fail(ctx, "expected an object");
    }
    EnergyLevelSet set;
    set.eigenvalues = as_number_array(require_field(j, "eigenvalues", ctx), ctx + ".eigenvalues");
    for (size_t i = 1; i < set.eigenvalues.size(); ++i) {
        if (set.eigenvalues[i] < set.eigenvalues[i - 1]) {
            fail(ctx + ".eigenvalues",
                 "not sorted non-decreasing at index " + std::to_string(i));
        }
    }
    if (auto it = j.find("kpoint"); it != j.end()) {
        set.kpoint = as_string(*it, ctx + ".kpoint");
    }
    if (set.kpoint != "Gamma") {
        fail(ctx + ".kpoint", "only the Gamma point is supported");
    }
    if (auto it = j.find("band_indices"); it != j.end()) {
        if (!it->is_array() || it->size() != set.eigenvalues.size()) {
            fail(ctx + ".band_indices", "shape mismatch with eigenvalues");
        }
        std::vector<int> idx;
        for (size_t i = 0; i < it->size(); ++i) {
            idx.push_back(as_int((*it)[i], ctx + ".band_indices[" + std::to_string(i) + "]"));
        }
        auto sorted = idx;
        std::sort(sorted.begin(), sorted.end());
        for (size_t i = 0; i < sorted.size(); ++i) {
            if (sorted[i] != static_cast<int>(i)) {
                fail(ctx + ".band_indices", "must be a permutation of 0..n-1");
            }
        }
        set.band_indices = std::move(idx);
    }
    return set;
}

json level_set_to_json(const EnergyLevelSet& set) {
    json j;
    j["eigenvalues"] = set.eigenvalues;
    j["kpoint"] = set.kpoint;
    if (!set.band_indices.empty()) {
        j["band_indices"] = set.band_indices;
    }
    return j;
}

WavefunctionSet parse_wavefunctions(const json& j, const std::string& ctx) {
    if (!j.is_object()) {
        fail(ctx, "expected an object");
    }
    const json& jbasis = require_field(j, "basis", ctx);
    if (!jbasis.is_array() || jbasis.empty()) {
        fail(ctx + ".basis", "expected a non-empty array of G-vectors");
    }
    auto basis = std::make_shared<std::vector<Vec3>>();
    basis->reserve(jbasis.size());
    for (size_t i = 0; i < jbasis.size(); ++i) {
        basis->push_back(as_vec3(jbasis[i], ctx + ".basis[" + std::to_string(i) + "]"));
    }

    WavefunctionSet wf;
    wf.basis = basis;
    const json& jstates = require_field(j, "states", ctx);
    if (!jstates.is_array()) {
        fail(ctx + ".states", "expected an array");
    }
    for (size_t i = 0; i < jstates.size(); ++i) {
        const std::string sctx = ctx + ".states[" + std::to_string(i) + "]";
        const json& js = jstates[i];
        PlaneWaveState state;
        state.basis = basis;
        state.band_index = as_int(require_field(js, "band", sctx), sctx + ".band");
        if (state.band_index < 0) {
            fail(sctx + ".band", "must be >= 0");
        }
        state.spin = parse_spin(as_string(require_field(js, "spin", sctx), sctx + ".spin"));
        state.eigenvalue =
            as_finite_number(require_field(js, "eigenvalue", sctx), sctx + ".eigenvalue");
        const json& jc = require_field(js, "coefficients", sctx);
        if (!jc.is_array() || jc.size() != basis->size()) {
            fail(sctx + ".coefficients", "shape mismatch with basis");
        }
        double norm2 = 0.0;
        state.coefficients.reserve(jc.size());
        for (size_t k = 0; k < jc.size(); ++k) {
            const std::string cctx = sctx + ".coefficients[" + std::to_string(k) + "]";
            auto pair = as_number_array(jc[k], cctx);
            if (pair.size() != 2) {
                fail(cctx, "expected [re, im]");
            }
            state.coefficients.emplace_back(pair[0], pair[1]);
            norm2 += pair[0] * pair[0] + pair[1] * pair[1];
        }
        if (std::abs(norm2 - 1.0) > 1e-8) {
            fail(sctx, "state not normalized to 1 within 1e-8");
        }
        for (const auto& other : wf.states) {
            if (other.spin == state.spin && other.band_index == state.band_index) {
                fail(sctx, "duplicate (spin, band) entry");
            }
        }
        wf.states.push_back(std::move(state));
    }
    std::sort(wf.states.begin(), wf.states.end(), [](const auto& a, const auto& b) {
        return std::tie(a.spin, a.band_index) < std::tie(b.spin, b.band_index);
    });
    return wf;
}

json wavefunctions_to_json(const WavefunctionSet& wf) {
    json j;
    json jbasis = json::array();
    for (const auto& g : *wf.basis) {
        jbasis.push_back({g[0], g[1], g[2]});
    }
    j["basis"] = std::move(jbasis);
    json jstates = json::array();
    for (const auto& s : wf.states) {
        json js;
        js["band"] = s.band_index;
        js["spin"] = to_string(s.spin);
        js["eigenvalue"] = s.eigenvalue;
        json jc = json::array();
        for (const auto& c : s.coefficients) {
            jc.push_back({c.real(), c.imag()});
        }
        js["coefficients"] = std::move(jc);
        jstates.push_back(std::move(js));
    }
    j["states"] = std::move(jstates);
    return j;
}

const char* const kKnownFields[] = {
    "schema",          "defect_id",          "element",
    "site",            "charge",             "supercell_atoms",
    "total_energy",    "level_sets",         "occupations",
    "wavefunctions",   "zpl_override",       "excited_total_energy",
    "displacement_vector", "force_constants", "transitions",
    "bes_override",    "hr_total_override",  "correction",
    "provenance",
};

bool is_known_field(const std::string& key) {
    for (const char* k : kKnownFields) {
        if (key == k) {
            return true;
        }
    }
    return false;
}

}  // namespace

std::string to_string(Spin s) {
    return s == Spin::up ? "up" : "down";
}

std::string to_string(Site s) {
    switch (s) {
        case Site::substitutional: return "substitutional";
        case Site::tet_interstitial: return "tet_interstitial";
        case Site::hex_interstitial: return "hex_interstitial";
    }
    return "?";
}

std::string to_string(LevelStage s) {
    return s == LevelStage::base ? "base" : "corrected";
}

std::string to_string(TransitionStage s) {
    return s == TransitionStage::screening ? "screening" : "refined";
}

std::string to_string(TransitionNature n) {
    switch (n) {
        case TransitionNature::donor_bx: return "donor_bx";
        case TransitionNature::acceptor_bx: return "acceptor_bx";
        case TransitionNature::intra_defect: return "intra_defect";
    }
    return "?";
}

std::string to_string(CorrectionScheme s) {
    return s == CorrectionScheme::none ? "none" : "point_charge";
}

Spin parse_spin(const std::string& s) {
    if (s == "up") return Spin::up;
    if (s == "down") return Spin::down;
    throw ValidationError("unknown spin channel: " + s);
}

Site parse_site(const std::string& s) {
    if (s == "substitutional") return Site::substitutional;
    if (s == "tet_interstitial") return Site::tet_interstitial;
    if (s == "hex_interstitial") return Site::hex_interstitial;
    throw ValidationError("unknown site: " + s);
}

LevelStage parse_level_stage(const std::string& s) {
    if (s == "base") return LevelStage::base;
    if (s == "corrected") return LevelStage::corrected;
    throw ValidationError("unknown level stage: " + s);
}

TransitionStage parse_transition_stage(const std::string& s) {
    if (s == "screening") return TransitionStage::screening;
    if (s == "refined") return TransitionStage::refined;
    throw ValidationError("unknown transition stage: " + s);
}

TransitionNature parse_transition_nature(const std::string& s) {
    if (s == "donor_bx") return TransitionNature::donor_bx;
    if (s == "acceptor_bx") return TransitionNature::acceptor_bx;
    if (s == "intra_defect") return TransitionNature::intra_defect;
    throw ValidationError("unknown transition nature: " + s);
}

CorrectionScheme parse_correction_scheme(const std::string& s) {
    if (s == "none") return CorrectionScheme::none;
    if (s == "point_charge") return CorrectionScheme::point_charge;
    throw ValidationError("unknown correction scheme: " + s);
}

bool operator==(const PlaneWaveState& a, const PlaneWaveState& b) {
    if (a.eigenvalue != b.eigenvalue || a.spin != b.spin || a.band_index != b.band_index ||
        a.coefficients != b.coefficients) {
        return false;
    }
    if (a.basis == b.basis) {
        return true;
    }
    if (!a.basis || !b.basis) {
        return false;
    }
    return *a.basis == *b.basis;
}

const PlaneWaveState* WavefunctionSet::find(Spin spin, int band) const {
    for (const auto& s : states) {
        if (s.spin == spin && s.band_index == band) {
            return &s;
        }
    }
    return nullptr;
}

bool operator==(const WavefunctionSet& a, const WavefunctionSet& b) {
    if (a.states.size() != b.states.size()) {
        return false;
    }
    for (size_t i = 0; i < a.states.size(); ++i) {
        if (!(a.states[i] == b.states[i])) {
            return false;
        }
    }
    return true;
}

std::string canonical_defect_id(const std::string& element, Site site, int charge) {
    std::string q = charge > 0 ? "+" + std::to_string(charge) : std::to_string(charge);
    return element + ":" + to_string(site) + ":q" + q;
}

std::string DefectRecord::defect_id() const {
    return canonical_defect_id(element, site, charge);
}

std::string DefectRecord::identity() const {
    return element + ":" + to_string(site);
}

const TransitionMetadata* DefectRecord::transition(TransitionStage stage) const {
    const TransitionMetadata* best = nullptr;
    for (const auto& t : transitions) {
        if (t.stage != stage) {
            continue;
        }
        if (!best || t.tdm > best->tdm) {
            best = &t;
        }
    }
    return best;
}

bool operator==(const DefectRecord& a, const DefectRecord& b) {
    return a.element == b.element && a.site == b.site && a.charge == b.charge &&
           a.supercell_atoms == b.supercell_atoms && a.total_energy == b.total_energy &&
           a.level_sets == b.level_sets && a.occupations == b.occupations &&
           a.wavefunctions == b.wavefunctions && a.zpl_override == b.zpl_override &&
           a.excited_total_energy == b.excited_total_energy &&
           a.displacement_vector == b.displacement_vector &&
           a.force_constants == b.force_constants && a.transitions == b.transitions &&
           a.bes_override == b.bes_override && a.hr_total_override == b.hr_total_override &&
           a.correction == b.correction && a.provenance == b.provenance;
}

double HostSpec::volume() const {
    const auto& a = lattice_vectors[0];
    const auto& b = lattice_vectors[1];
    const auto& c = lattice_vectors[2];
    double det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
                 a[2] * (b[0] * c[1] - b[1] * c[0]);
    return std::abs(det);
}

bool HostSpec::is_cubic(double tol) const {
    auto dot = [](const Vec3& u, const Vec3& v) {
        return u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    };
    double l0 = std::sqrt(dot(lattice_vectors[0], lattice_vectors[0]));
    double l1 = std::sqrt(dot(lattice_vectors[1], lattice_vectors[1]));
    double l2 = std::sqrt(dot(lattice_vectors[2], lattice_vectors[2]));
    if (l0 <= 0.0) {
        return false;
    }
    if (std::abs(l1 - l0) > tol * l0 || std::abs(l2 - l0) > tol * l0) {
        return false;
    }
    return std::abs(dot(lattice_vectors[0], lattice_vectors[1])) <= tol * l0 * l0 &&
           std::abs(dot(lattice_vectors[1], lattice_vectors[2])) <= tol * l0 * l0 &&
           std::abs(dot(lattice_vectors[0], lattice_vectors[2])) <= tol * l0 * l0;
}

void HostSpec::validate() const {
    if (!(band_gap > 0.0) || !std::isfinite(band_gap)) {
        throw ValidationError("host.band_gap: must be > 0");
    }
    if (!(dielectric_constant >= 1.0)) {
        throw ValidationError("host.dielectric_constant: must be >= 1");
    }
    if (!(refractive_index > 0.0)) {
        throw ValidationError("host.refractive_index: must be > 0");
    }
    if (volume() < 1e-9) {
        throw ValidationError("host.lattice_vectors: matrix not invertible");
    }
}

double ChemPotSet::mu_for(const std::string& element) const {
    auto it = chemical_potentials.find(element);
    if (it == chemical_potentials.end()) {
        throw ValidationError("missing chemical potential for " + element);
    }
    return it->second;
}

DefectRecord parse_record(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed document: ") + e.what());
    }
    if (!j.is_object()) {
        throw ValidationError("malformed document: top level must be an object");
    }

    const std::string ctx = "record";
    int schema = as_int(require_field(j, "schema", ctx), ctx + ".schema");
    if (schema != kSchemaVersion) {
        fail(ctx + ".schema", "unsupported schema version " + std::to_string(schema));
    }

    DefectRecord rec;
    rec.element = as_string(require_field(j, "element", ctx), ctx + ".element");
    if (rec.element.empty()) {
        fail(ctx + ".element", "must be non-empty");
    }
    rec.site = parse_site(as_string(require_field(j, "site", ctx), ctx + ".site"));
    rec.charge = as_int(require_field(j, "charge", ctx), ctx + ".charge");
    rec.supercell_atoms =
        as_int(require_field(j, "supercell_atoms", ctx), ctx + ".supercell_atoms");
    if (rec.supercell_atoms <= 0) {
        fail(ctx + ".supercell_atoms", "must be > 0");
    }
    rec.total_energy =
        as_finite_number(require_field(j, "total_energy", ctx), ctx + ".total_energy");

    const json& jlevels = require_field(j, "level_sets", ctx);
    if (!jlevels.is_object() || jlevels.empty()) {
        fail(ctx + ".level_sets", "expected an object with base and/or corrected entries");
    }
    for (const auto& [stage_key, jstage] : jlevels.items()) {
        LevelStage stage = parse_level_stage(stage_key);
        if (!jstage.is_object() || jstage.empty()) {
            fail(ctx + ".level_sets." + stage_key, "expected per-spin level sets");
        }
        std::map<Spin, EnergyLevelSet> channels;
        for (const auto& [spin_key, jset] : jstage.items()) {
            Spin spin = parse_spin(spin_key);
            channels[spin] =
                parse_level_set(jset, ctx + ".level_sets." + stage_key + "." + spin_key);
        }
        rec.level_sets[stage] = std::move(channels);
    }
    // All stages must expose the same channels with matching band counts.
    const auto& first_stage = rec.level_sets.begin()->second;
    for (const auto& [stage, channels] : rec.level_sets) {
        if (channels.size() != first_stage.size()) {
            fail(ctx + ".level_sets", "stages expose different spin channels");
        }
        for (const auto& [spin, set] : channels) {
            auto it = first_stage.find(spin);
            if (it == first_stage.end()) {
                fail(ctx + ".level_sets", "stages expose different spin channels");
            }
            if (it->second.eigenvalues.size() != set.eigenvalues.size()) {
                fail(ctx + ".level_sets", "shape mismatch between stages for spin " +
                                              to_string(spin));
            }
        }
    }

    if (auto it = j.find("occupations"); it != j.end()) {
        if (!it->is_object()) {
            fail(ctx + ".occupations", "expected an object keyed by spin channel");
        }
        for (const auto& [spin_key, jocc] : it->items()) {
            Spin spin = parse_spin(spin_key);
            auto occ = as_number_array(jocc, ctx + ".occupations." + spin_key);
            auto lt = first_stage.find(spin);
            if (lt == first_stage.end()) {
                fail(ctx + ".occupations." + spin_key,
                     "shape mismatch: no level set for this spin channel");
            }
            if (occ.size() != lt->second.eigenvalues.size()) {
                fail(ctx + ".occupations." + spin_key,
                     "shape mismatch: length " + std::to_string(occ.size()) +
                         " != eigenvalues length " +
                         std::to_string(lt->second.eigenvalues.size()));
            }
            for (size_t i = 0; i < occ.size(); ++i) {
                if (occ[i] < 0.0 || occ[i] > 1.0) {
                    fail(ctx + ".occupations." + spin_key + "[" + std::to_string(i) + "]",
                         "occupation outside [0, 1]");
                }
            }
            rec.occupations[spin] = std::move(occ);
        }
    }

    if (auto it = j.find("wavefunctions"); it != j.end()) {
        rec.wavefunctions = parse_wavefunctions(*it, ctx + ".wavefunctions");
    }
    if (auto it = j.find("zpl_override"); it != j.end()) {
        double v = as_finite_number(*it, ctx + ".zpl_override");
        if (v <= 0.0) {
            fail(ctx + ".zpl_override", "must be > 0");
        }
        rec.zpl_override = v;
    }
    if (auto it = j.find("excited_total_energy"); it != j.end()) {
        rec.excited_total_energy = as_finite_number(*it, ctx + ".excited_total_energy");
    }
    if (auto it = j.find("displacement_vector"); it != j.end()) {
        const std::string dctx = ctx + ".displacement_vector";
        if (!it->is_object()) {
            fail(dctx, "expected an object");
        }
        DisplacementField field;
        const json& jdr = require_field(*it, "delta_r", dctx);
        if (!jdr.is_array() || jdr.empty()) {
            fail(dctx + ".delta_r", "expected a non-empty array");
        }
        for (size_t i = 0; i < jdr.size(); ++i) {
            field.delta_r.push_back(as_vec3(jdr[i], dctx + ".delta_r[" + std::to_string(i) + "]"));
        }
        field.masses = as_number_array(require_field(*it, "masses", dctx), dctx + ".masses");
        if (field.masses.size() != field.delta_r.size()) {
            fail(dctx + ".masses", "shape mismatch with delta_r");
        }
        for (double m : field.masses) {
            if (m <= 0.0) {
                fail(dctx + ".masses", "masses must be > 0");
            }
        }
        rec.displacement_vector = std::move(field);
    }
    if (auto it = j.find("force_constants"); it != j.end()) {
        const std::string fctx = ctx + ".force_constants";
        if (!it->is_array() || it->empty()) {
            fail(fctx, "expected a non-empty square matrix");
        }
        SymmetricMatrix m;
        m.dim = static_cast<int>(it->size());
        m.values.reserve(static_cast<size_t>(m.dim) * m.dim);
        for (int r = 0; r < m.dim; ++r) {
            auto row = as_number_array((*it)[r], fctx + "[" + std::to_string(r) + "]");
            if (static_cast<int>(row.size()) != m.dim) {
                fail(fctx, "matrix not square");
            }
            m.values.insert(m.values.end(), row.begin(), row.end());
        }
        for (int r = 0; r < m.dim; ++r) {
            for (int c = r + 1; c < m.dim; ++c) {
                if (std::abs(m.at(r, c) - m.at(c, r)) > 1e-8) {
                    fail(fctx, "matrix not symmetric within 1e-8");
                }
            }
        }
        if (rec.displacement_vector &&
            m.dim != 3 * static_cast<int>(rec.displacement_vector->delta_r.size())) {
            fail(fctx, "shape mismatch with displacement_vector");
        }
        rec.force_constants = std::move(m);
    }
    if (auto it = j.find("transitions"); it != j.end()) {
        if (!it->is_array()) {
            fail(ctx + ".transitions", "expected an array");
        }
        for (size_t i = 0; i < it->size(); ++i) {
            const std::string tctx = ctx + ".transitions[" + std::to_string(i) + "]";
            const json& jt = (*it)[i];
            TransitionMetadata t;
            t.stage = parse_transition_stage(
                as_string(require_field(jt, "stage", tctx), tctx + ".stage"));
            t.spin = parse_spin(as_string(require_field(jt, "spin", tctx), tctx + ".spin"));
            t.delta_ks = as_finite_number(require_field(jt, "delta_ks", tctx), tctx + ".delta_ks");
            if (t.delta_ks <= 0.0) {
                fail(tctx + ".delta_ks", "must be > 0");
            }
            t.tdm = as_finite_number(require_field(jt, "tdm", tctx), tctx + ".tdm");
            if (t.tdm < 0.0) {
                fail(tctx + ".tdm", "must be >= 0");
            }
            t.nature = parse_transition_nature(
                as_string(require_field(jt, "nature", tctx), tctx + ".nature"));
            if (auto f = jt.find("initial_ipr"); f != jt.end()) {
                t.initial_ipr = as_finite_number(*f, tctx + ".initial_ipr");
            }
            if (auto f = jt.find("final_ipr"); f != jt.end()) {
                t.final_ipr = as_finite_number(*f, tctx + ".final_ipr");
            }
            rec.transitions.push_back(std::move(t));
        }
    }
    if (auto it = j.find("bes_override"); it != j.end()) {
        rec.bes_override = as_finite_number(*it, ctx + ".bes_override");
    }
    if (auto it = j.find("hr_total_override"); it != j.end()) {
        double v = as_finite_number(*it, ctx + ".hr_total_override");
        if (v < 0.0) {
            fail(ctx + ".hr_total_override", "must be >= 0");
        }
        rec.hr_total_override = v;
    }
    if (auto it = j.find("correction"); it != j.end()) {
        const std::string cctx = ctx + ".correction";
        if (!it->is_object()) {
            fail(cctx, "expected an object");
        }
        rec.correction.scheme = parse_correction_scheme(
            as_string(require_field(*it, "scheme", cctx), cctx + ".scheme"));
        if (auto f = it->find("extra"); f != it->end()) {
            rec.correction.extra = as_finite_number(*f, cctx + ".extra");
        }
    }
    if (auto it = j.find("provenance"); it != j.end()) {
        rec.provenance = as_string(*it, ctx + ".provenance");
    }
    if (auto it = j.find("defect_id"); it != j.end()) {
        std::string given = as_string(*it, ctx + ".defect_id");
        if (given != rec.defect_id()) {
            fail(ctx + ".defect_id", "does not match canonical form " + rec.defect_id());
        }
    }

    // Unknown fields are preserved as provenance text, never dropped silently.
    for (const auto& [key, value] : j.items()) {
        if (!is_known_field(key)) {
            if (!rec.provenance.empty()) {
                rec.provenance += "\n";
            }
            rec.provenance += "unknown field " + key + " = " + value.dump();
        }
    }
    return rec;
}

std::string serialize_record(const DefectRecord& rec) {
    json j;
    j["schema"] = kSchemaVersion;
    j["defect_id"] = rec.defect_id();
    j["element"] = rec.element;
    j["site"] = to_string(rec.site);
    j["charge"] = rec.charge;
    j["supercell_atoms"] = rec.supercell_atoms;
    j["total_energy"] = rec.total_energy;
    json jlevels;
    for (const auto& [stage, channels] : rec.level_sets) {
        json jstage;
        for (const auto& [spin, set] : channels) {
            jstage[to_string(spin)] = level_set_to_json(set);
        }
        jlevels[to_string(stage)] = std::move(jstage);
    }
    j["level_sets"] = std::move(jlevels);
    if (!rec.occupations.empty()) {
        json jocc;
        for (const auto& [spin, occ] : rec.occupations) {
            jocc[to_string(spin)] = occ;
        }
        j["occupations"] = std::move(jocc);
    }
    if (rec.wavefunctions) {
        j["wavefunctions"] = wavefunctions_to_json(*rec.wavefunctions);
    }
    if (rec.zpl_override) {
        j["zpl_override"] = *rec.zpl_override;
    }
    if (rec.excited_total_energy) {
        j["excited_total_energy"] = *rec.excited_total_energy;
    }
    if (rec.displacement_vector) {
        json jd;
        json jdr = json::array();
        for (const auto& d : rec.displacement_vector->delta_r) {
            jdr.push_back({d[0], d[1], d[2]});
        }
        jd["delta_r"] = std::move(jdr);
        jd["masses"] = rec.displacement_vector->masses;
        j["displacement_vector"] = std::move(jd);
    }
    if (rec.force_constants) {
        json jm = json::array();
        for (int r = 0; r < rec.force_constants->dim; ++r) {
            json row = json::array();
            for (int c = 0; c < rec.force_constants->dim; ++c) {
                row.push_back(rec.force_constants->at(r, c));
            }
            jm.push_back(std::move(row));
        }
        j["force_constants"] = std::move(jm);
    }
    if (!rec.transitions.empty()) {
        json jt = json::array();
        for (const auto& t : rec.transitions) {
            json e;
            e["stage"] = to_string(t.stage);
            e["spin"] = to_string(t.spin);
            e["delta_ks"] = t.delta_ks;
            e["tdm"] = t.tdm;
            e["nature"] = to_string(t.nature);
            if (t.initial_ipr) {
                e["initial_ipr"] = *t.initial_ipr;
            }
            if (t.final_ipr) {
                e["final_ipr"] = *t.final_ipr;
            }
            jt.push_back(std::move(e));
        }
        j["transitions"] = std::move(jt);
    }
    if (rec.bes_override) {
        j["bes_override"] = *rec.bes_override;
    }
    if (rec.hr_total_override) {
        j["hr_total_override"] = *rec.hr_total_override;
    }
    if (rec.correction.scheme != CorrectionScheme::none || rec.correction.extra != 0.0) {
        json jc;
        jc["scheme"] = to_string(rec.correction.scheme);
        jc["extra"] = rec.correction.extra;
        j["correction"] = std::move(jc);
    }
    if (!rec.provenance.empty()) {
        j["provenance"] = rec.provenance;
    }
    return j.dump(2) + "\n";
}

HostSpec parse_host(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed host document: ") + e.what());
    }
    const std::string ctx = "host";
    HostSpec host;
    host.band_gap = as_finite_number(require_field(j, "band_gap", ctx), ctx + ".band_gap");
    if (auto it = j.find("vbm_reference"); it != j.end()) {
        host.vbm_reference = as_finite_number(*it, ctx + ".vbm_reference");
    }
    host.refractive_index =
        as_finite_number(require_field(j, "refractive_index", ctx), ctx + ".refractive_index");
    host.dielectric_constant = as_finite_number(require_field(j, "dielectric_constant", ctx),
                                                ctx + ".dielectric_constant");
    const json& jl = require_field(j, "lattice_vectors", ctx);
    if (!jl.is_array() || jl.size() != 3) {
        fail(ctx + ".lattice_vectors", "expected a 3x3 matrix");
    }
    for (int i = 0; i < 3; ++i) {
        host.lattice_vectors[i] =
            as_vec3(jl[i], ctx + ".lattice_vectors[" + std::to_string(i) + "]");
    }
    host.bulk_total_energy_per_supercell =
        as_finite_number(require_field(j, "bulk_total_energy_per_supercell", ctx),
                         ctx + ".bulk_total_energy_per_supercell");
    if (auto it = j.find("host_element"); it != j.end()) {
        host.host_element = as_string(*it, ctx + ".host_element");
    }
    host.validate();
    return host;
}

std::string serialize_host(const HostSpec& host) {
    json j;
    j["band_gap"] = host.band_gap;
    j["vbm_reference"] = host.vbm_reference;
    j["refractive_index"] = host.refractive_index;
    j["dielectric_constant"] = host.dielectric_constant;
    j["lattice_vectors"] = {
        {host.lattice_vectors[0][0], host.lattice_vectors[0][1], host.lattice_vectors[0][2]},
        {host.lattice_vectors[1][0], host.lattice_vectors[1][1], host.lattice_vectors[1][2]},
        {host.lattice_vectors[2][0], host.lattice_vectors[2][1], host.lattice_vectors[2][2]},
    };
    j["bulk_total_energy_per_supercell"] = host.bulk_total_energy_per_supercell;
    j["host_element"] = host.host_element;
    return j.dump(2) + "\n";
}

ChemPotSet parse_chempots(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed chempots document: ") + e.what());
    }
    const std::string ctx = "chempots";
    ChemPotSet set;
    set.label = as_string(require_field(j, "label", ctx), ctx + ".label");
    const json& jm = require_field(j, "chemical_potentials", ctx);
    if (!jm.is_object()) {
        fail(ctx + ".chemical_potentials", "expected an object");
    }
    for (const auto& [el, mu] : jm.items()) {
        set.chemical_potentials[el] =
            as_finite_number(mu, ctx + ".chemical_potentials." + el);
    }
    return set;
}

std::string serialize_chempots(const ChemPotSet& chempots) {
    json j;
    j["label"] = chempots.label;
    json jm;
    for (const auto& [el, mu] : chempots.chemical_potentials) {
        jm[el] = mu;
    }
    j["chemical_potentials"] = std::move(jm);
    return j.dump(2) + "\n";
}

}  // namespace qds
