#pragma once

// Dataset manifests.
//
// JSON form:
//   {
//     "base_dir": "data",                     // optional, relative to the manifest file
//     "cases": [
//       {"id": "p01", "flair": "p01/flair.nii.gz", "lesion_mask": "p01/mask.nii.gz",
//        "predictions": {"unet": "p01/unet.nii.gz"}}
//     ]
//   }
// CSV form: a header row naming `id` and role columns; `prediction:<name>`
// columns fill the predictions map. Fields may not contain commas or quotes.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lesionforge/augment_io.hpp"

namespace lesionforge {

inline const std::set<std::string>& manifest_roles() {
    static const std::set<std::string> roles{"flair", "lesion_mask", "t1",  "t2",    "new_lesions",
                                             "prediction", "gt",     "atlas", "wm_mask"};
    return roles;
}

struct CaseEntry {
    std::string id;
    std::map<std::string, std::string> roles;        ///< role -> relative path
    std::map<std::string, std::string> predictions;  ///< method -> relative path
};

struct DatasetManifest {
    std::filesystem::path base_dir;
    std::vector<CaseEntry> cases;

    std::optional<std::filesystem::path> path_of(const CaseEntry& c, const std::string& role) const {
        const auto it = c.roles.find(role);
        if (it == c.roles.end()) return std::nullopt;
        return base_dir / it->second;
    }

    std::filesystem::path require(const CaseEntry& c, const std::string& role) const {
        auto p = path_of(c, role);
        if (!p) throw DomainError("case '" + c.id + "' has no '" + role + "' entry");
        return *p;
    }

    /// Method name -> prediction path. A plain `prediction` role is the method "prediction".
    std::map<std::string, std::filesystem::path> predictions_of(const CaseEntry& c) const {
        std::map<std::string, std::filesystem::path> out;
        if (auto p = path_of(c, "prediction")) out["prediction"] = *p;
        for (const auto& [name, rel] : c.predictions) out[name] = base_dir / rel;
        return out;
    }

    void validate() const {
        std::set<std::string> ids;
        for (const auto& c : cases) {
            if (c.id.empty()) throw ParameterError("manifest: case without id");
            if (!ids.insert(c.id).second) throw ParameterError("manifest: duplicate case id '" + c.id + "'");
            auto check = [&](const std::string& rel) {
                if (std::filesystem::path(rel).is_absolute())
                    throw ParameterError("manifest: case '" + c.id + "' uses an absolute path; paths are relative to base_dir");
            };
            for (const auto& [role, rel] : c.roles) {
                if (!manifest_roles().count(role)) throw ParameterError("manifest: unknown role '" + role + "'");
                check(rel);
            }
            for (const auto& [_, rel] : c.predictions) check(rel);
        }
    }
};

inline DatasetManifest manifest_from_json(const json& j, const std::filesystem::path& manifest_dir) {
    detail::reject_unknown(j, {"base_dir", "cases"}, "manifest");
    DatasetManifest m;
    m.base_dir = manifest_dir / j.value("base_dir", std::string("."));
    for (const auto& c : j.value("cases", json::array())) {
        CaseEntry e;
        for (const auto& [k, v] : c.items()) {
            if (k == "id") e.id = v.get<std::string>();
            else if (k == "predictions")
                for (const auto& [name, rel] : v.items()) e.predictions[name] = rel.get<std::string>();
            else e.roles[k] = v.get<std::string>();
        }
        m.cases.push_back(std::move(e));
    }
    m.validate();
    return m;
}

inline json manifest_to_json(const DatasetManifest& m, const std::string& base_dir = ".") {
    json cases = json::array();
    for (const auto& c : m.cases) {
        json e{{"id", c.id}};
        for (const auto& [role, rel] : c.roles) e[role] = rel;
        if (!c.predictions.empty()) e["predictions"] = c.predictions;
        cases.push_back(std::move(e));
    }
    return {{"base_dir", base_dir}, {"cases", cases}};
}

inline DatasetManifest manifest_from_csv(std::istream& in, const std::filesystem::path& manifest_dir) {
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            const auto b = field.find_first_not_of(" \t\r");
            const auto e = field.find_last_not_of(" \t\r");
            out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
        }
        if (!line.empty() && line.back() == ',') out.emplace_back();
        return out;
    };
    std::string line;
    if (!std::getline(in, line)) throw ParameterError("manifest: empty CSV");
    const auto header = split(line);
    if (std::find(header.begin(), header.end(), "id") == header.end())
        throw ParameterError("manifest: CSV header needs an 'id' column");
    DatasetManifest m;
    m.base_dir = manifest_dir;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto row = split(line);
        if (row.size() != header.size()) throw ParameterError("manifest: CSV row has wrong number of fields: " + line);
        CaseEntry e;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (row[i].empty()) continue;
            if (header[i] == "id") e.id = row[i];
            else if (header[i].rfind("prediction:", 0) == 0) e.predictions[header[i].substr(11)] = row[i];
            else e.roles[header[i]] = row[i];
        }
        m.cases.push_back(std::move(e));
    }
    m.validate();
    return m;
}

/// Dispatches on extension: .csv is CSV, anything else JSON.
inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    if (path.extension() == ".csv") {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path.string());
        return manifest_from_csv(in, dir);
    }
    return manifest_from_json(read_json_file(path), dir);
}

}  // namespace lesionforge
