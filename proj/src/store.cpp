#include "qds/store.hpp"

#include <fstream>
#include <sstream>

#include "qds/error.hpp"

namespace qds {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out << content;
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + " to " + path.string());
    }
}

}  // namespace

bool DefectStore::exists(const fs::path& root) {
    return fs::exists(root / "index");
}

DefectStore DefectStore::create(const fs::path& root, const HostSpec& host,
                                const ChemPotSet& chempots) {
    std::error_code ec;
    fs::create_directories(root / "records", ec);
    if (ec) {
        throw IoError("cannot create store at " + root.string());
    }
    if (fs::exists(root / "index")) {
        throw IoError("store already exists at " + root.string());
    }
    host.validate();
    DefectStore store;
    store.root_ = root;
    store.host_ = host;
    store.chempots_ = chempots;
    write_file(root / "host", serialize_host(host));
    write_file(root / "chempots", serialize_chempots(chempots));
    store.write_index();
    return store;
}

DefectStore DefectStore::open(const fs::path& root) {
    if (!exists(root)) {
        throw IoError("no store at " + root.string());
    }
    DefectStore store;
    store.root_ = root;
    store.host_ = parse_host(read_file(root / "host"));
    store.chempots_ = parse_chempots(read_file(root / "chempots"));
    std::istringstream index(read_file(root / "index"));
    std::string line;
    while (std::getline(index, line)) {
        if (line.empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw IoError("corrupt index line: " + line);
        }
        store.index_[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return store;
}

void DefectStore::write_index() const {
    std::ostringstream ss;
    for (const auto& [id, path] : index_) {
        ss << id << '\t' << path << '\n';
    }
    write_file(root_ / "index", ss.str());
}

std::string DefectStore::put(const DefectRecord& rec) {
    const std::string id = rec.defect_id();
    const std::string serialized = serialize_record(rec);
    auto it = index_.find(id);
    if (it != index_.end()) {
        std::string existing = read_file(root_ / it->second);
        if (existing != serialized) {
            throw ValidationError("id collision with differing content: " + id);
        }
        return id;  // identical content, nothing to do
    }
    const std::string rel = "records/" + id;
    write_file(root_ / rel, serialized);
    index_[id] = rel;
    write_index();
    return id;
}

bool DefectStore::contains(const std::string& defect_id) const {
    return index_.count(defect_id) > 0;
}

DefectRecord DefectStore::get(const std::string& defect_id) const {
    auto it = index_.find(defect_id);
    if (it == index_.end()) {
        throw IoError("no record " + defect_id + " in store");
    }
    return parse_record(read_file(root_ / it->second));
}

std::vector<DefectRecord> DefectStore::query(const Filter& filter) const {
    std::vector<DefectRecord> out;
    for (const auto& [id, path] : index_) {
        DefectRecord rec = parse_record(read_file(root_ / path));
        if (filter.element && rec.element != *filter.element) {
            continue;
        }
        if (filter.site && rec.site != *filter.site) {
            continue;
        }
        if (filter.charge && rec.charge != *filter.charge) {
            continue;
        }
        if (filter.predicate && !filter.predicate(rec)) {
            continue;
        }
        out.push_back(std::move(rec));
    }
    return out;  // index_ is ordered by defect_id
}

std::vector<std::string> DefectStore::ids() const {
    std::vector<std::string> out;
    out.reserve(index_.size());
    for (const auto& [id, path] : index_) {
        out.push_back(id);
    }
    return out;
}

}  // namespace qds
