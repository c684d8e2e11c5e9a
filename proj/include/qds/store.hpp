#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qds/records.hpp"

namespace qds {

/// On-disk record store: `<root>/index` (flat text map), one document per
/// defect under `<root>/records/<defect_id>`, plus the host and chemical
/// potential references. Records are immutable once stored; writes follow a
/// single-writer contract, reads may run concurrently.
class DefectStore {
public:
    struct Filter {
        std::optional<std::string> element;
        std::optional<Site> site;
        std::optional<int> charge;
        std::function<bool(const DefectRecord&)> predicate;
    };

    static DefectStore create(const std::filesystem::path& root, const HostSpec& host,
                              const ChemPotSet& chempots);
    static DefectStore open(const std::filesystem::path& root);
    static bool exists(const std::filesystem::path& root);

    const std::filesystem::path& root() const { return root_; }
    const HostSpec& host() const { return host_; }
    const ChemPotSet& chempots() const { return chempots_; }

    /// Idempotent by defect_id: identical content overwrites, differing
    /// content is an error. Returns the defect_id.
    std::string put(const DefectRecord& rec);

    DefectRecord get(const std::string& defect_id) const;
    bool contains(const std::string& defect_id) const;

    /// Matching records sorted by defect_id, independent of insertion order.
    std::vector<DefectRecord> query(const Filter& filter = {}) const;

    std::vector<std::string> ids() const;
    size_t size() const { return index_.size(); }

private:
    DefectStore() = default;

    void write_index() const;

    std::filesystem::path root_;
    std::map<std::string, std::string> index_;  // defect_id -> relative path
    HostSpec host_;
    ChemPotSet chempots_;
};

}  // namespace qds
