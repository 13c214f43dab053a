#include "vulnscore/nvd.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <tuple>

#include "json_util.hpp"
#include "vulnscore/error.hpp"

namespace vulnscore::nvd {

using json = nlohmann::json;

std::string_view provenance_name(Provenance p) noexcept {
    return p == Provenance::Nvd ? "NVD" : "Manual";
}

bool FilterConfig::product_allowed(const Product& p) const {
    return product_allow_list.empty() || product_allow_list.contains(p.product);
}

namespace {

std::vector<std::string> split_cpe(std::string_view uri) {
    std::vector<std::string> parts(1);
    for (std::size_t k = 0; k < uri.size(); ++k) {
        const char c = uri[k];
        if (c == '\\' && k + 1 < uri.size()) {
            parts.back() += uri[++k];
        } else if (c == ':') {
            parts.emplace_back();
        } else {
            parts.back() += c;
        }
    }
    return parts;
}

void collect_products(const json& node, std::vector<Product>& out) {
    if (!node.is_object()) return;
    if (auto it = node.find("cpe_match"); it != node.end() && it->is_array()) {
        for (const auto& match : *it) {
            if (!match.is_object()) continue;
            if (match.value("vulnerable", true) == false) continue;
            const auto uri = match.value("cpe23Uri", std::string{});
            const auto parts = split_cpe(uri);
            // cpe:2.3:part:vendor:product:version:...
            if (parts.size() < 6 || parts[0] != "cpe" || parts[1] != "2.3") continue;
            Product p{parts[3], parts[4], parts[5]};
            if ((p.version == "*" || p.version == "-") && match.contains("versionEndIncluding") &&
                match["versionEndIncluding"].is_string()) {
                p.version = match["versionEndIncluding"].get<std::string>();
            }
            if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(std::move(p));
        }
    }
    if (auto it = node.find("children"); it != node.end() && it->is_array()) {
        for (const auto& child : *it) collect_products(child, out);
    }
}

CveRecord parse_item(const json& item, const std::string& at) {
    using namespace jsonutil;
    require_object(item, at);
    CveRecord r;

    const auto& cve = require_member(item, "cve", at);
    const auto& meta = require_member(cve, "CVE_data_meta", at + ".cve");
    r.id = require_string(meta, "ID", at + ".cve.CVE_data_meta");
    if (r.id.empty()) throw ValidationError(at + ".cve.CVE_data_meta.ID", "must be non-empty");

    if (auto d = cve.find("description"); d != cve.end() && d->is_object()) {
        for (const auto& entry : d->value("description_data", json::array())) {
            if (entry.value("lang", "en") != "en") continue;
            const auto text = entry.value("value", std::string{});
            if (!r.description.empty() && !text.empty()) r.description += ' ';
            r.description += text;
        }
    }

    if (auto p = cve.find("problemtype"); p != cve.end() && p->is_object()) {
        for (const auto& pt : p->value("problemtype_data", json::array())) {
            for (const auto& d : pt.value("description", json::array())) {
                const auto cwe = d.value("value", std::string{});
                if (!cwe.empty() &&
                    std::find(r.cwe_ids.begin(), r.cwe_ids.end(), cwe) == r.cwe_ids.end()) {
                    r.cwe_ids.push_back(cwe);
                }
            }
        }
    }

    if (auto c = item.find("configurations"); c != item.end() && c->is_object()) {
        for (const auto& node : c->value("nodes", json::array())) collect_products(node, r.products);
    }

    const json* v3 = nullptr;
    if (auto impact = item.find("impact"); impact != item.end() && impact->is_object()) {
        if (auto base = impact->find("baseMetricV3"); base != impact->end() && base->is_object()) {
            if (auto cv = base->find("cvssV3"); cv != base->end() && cv->is_object()) v3 = &*cv;
        }
    }
    if (v3 != nullptr) {
        const std::string path = at + ".impact.baseMetricV3.cvssV3";
        const auto text = optional_string(*v3, "vectorString", path);
        if (text && text->starts_with("CVSS:3.0/")) {
            try {
                r.cvss3_vector = cvss3::parse_vector(*text);
            } catch (const ParseError& e) {
                throw ValidationError(path + ".vectorString", e.what());
            }
            r.cvss3_vector_text = text;
            if (auto s = v3->find("baseScore"); s != v3->end() && s->is_number()) {
                const double stated = s->get<double>();
                const auto score = cvss3::base_score(*r.cvss3_vector);
                if (std::abs(stated * 10.0 - score.tenths()) > 1e-6) {
                    throw ValidationError(path + ".baseScore",
                                          "stated " + s->dump() + " but vector scores " +
                                              score.to_string());
                }
                r.cvss3_score = score;
            }
        }
    }
    return r;
}

}  // namespace

std::vector<CveRecord> parse_nvd_feed(std::string_view text) {
    const json doc = jsonutil::parse(text);
    const auto& items = jsonutil::require_array(doc, "CVE_Items", "$");
    std::vector<CveRecord> out;
    out.reserve(items.size());
    for (std::size_t k = 0; k < items.size(); ++k) {
        out.push_back(parse_item(items[k], "$.CVE_Items[" + std::to_string(k) + "]"));
    }
    return out;
}

std::vector<std::string> extract_function_names(std::string_view description) {
    static const std::regex patterns[] = {
        std::regex(R"(\bin the ([A-Za-z_][A-Za-z0-9_]*) function\b)", std::regex::icase),
        std::regex(R"(\bin function ([A-Za-z_][A-Za-z0-9_]*))", std::regex::icase),
        std::regex(R"(\b([A-Za-z_][A-Za-z0-9_]*)\(\) function\b)", std::regex::icase),
    };
    const std::string text(description);
    std::vector<std::pair<std::size_t, std::string>> hits;
    for (const auto& re : patterns) {
        for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
             it != std::sregex_iterator(); ++it) {
            hits.emplace_back(static_cast<std::size_t>(it->position(1)), it->str(1));
        }
    }
    std::sort(hits.begin(), hits.end());
    std::vector<std::string> names;
    for (auto& [pos, name] : hits) {
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
    return names;
}

FilterVerdict evaluate_filters(const CveRecord& record, const FilterConfig& config) {
    FilterVerdict v;
    v.has_cvss3 = record.cvss3_vector.has_value();
    v.allowed_product = std::any_of(record.products.begin(), record.products.end(),
                                    [&](const Product& p) { return config.product_allowed(p); });
    v.buffer_overflow = std::any_of(record.cwe_ids.begin(), record.cwe_ids.end(),
                                    [&](const auto& c) { return config.buffer_overflow_cwes.contains(c); });
    v.names_function = !extract_function_names(record.description).empty();
    return v;
}

std::vector<CveRecord> filter_records(const std::vector<CveRecord>& records,
                                      const FilterConfig& config) {
    std::vector<CveRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [&](const CveRecord& r) { return evaluate_filters(r, config).passes(); });
    return out;
}

std::vector<GroundTruthEntry> build_ground_truth(const std::vector<CveRecord>& records,
                                                 const std::vector<GroundTruthEntry>& manual,
                                                 const FilterConfig& config) {
    using Key = std::tuple<std::string, std::string, std::string>;
    std::map<Key, GroundTruthEntry> nvd_entries;

    for (const auto& r : records) {
        if (!r.cvss3_vector) continue;
        for (const auto& fn : extract_function_names(r.description)) {
            for (const auto& p : r.products) {
                if (!config.product_allowed(p)) continue;
                GroundTruthEntry e{p.product, p.version, fn, *r.cvss3_vector, Provenance::Nvd, r.id};
                Key key{e.program, e.version, e.function};
                auto [it, inserted] = nvd_entries.emplace(key, e);
                if (!inserted && !(it->second.vector == e.vector)) {
                    throw ConflictError("conflicting vectors for " + e.program + " " + e.version +
                                        " " + e.function + ": " + it->second.source_id + " vs " +
                                        r.id);
                }
            }
        }
    }

    std::map<Key, GroundTruthEntry> merged = std::move(nvd_entries);
    std::map<Key, const GroundTruthEntry*> manual_seen;
    for (const auto& m : manual) {
        if (m.provenance != Provenance::Manual) {
            throw ValidationError("manual", "entry for " + m.function + " must have provenance Manual");
        }
        Key key{m.program, m.version, m.function};
        if (auto [it, inserted] = manual_seen.emplace(key, &m); !inserted) {
            if (!(it->second->vector == m.vector)) {
                throw ConflictError("conflicting manual vectors for " + m.program + " " +
                                    m.version + " " + m.function);
            }
            continue;
        }
        merged.emplace(key, m);  // no-op when an NVD entry holds the key
    }

    std::vector<GroundTruthEntry> out;
    out.reserve(merged.size());
    for (auto& [key, e] : merged) out.push_back(std::move(e));
    return out;
}

json ground_truth_to_json(const std::vector<GroundTruthEntry>& entries) {
    json out = json::array();
    for (const auto& e : entries) {
        json j = {{"program", e.program},
                  {"version", e.version},
                  {"function", e.function},
                  {"vector", cvss3::serialize_vector(e.vector)},
                  {"provenance", provenance_name(e.provenance)}};
        if (!e.source_id.empty()) j["cve"] = e.source_id;
        out.push_back(std::move(j));
    }
    return out;
}

std::vector<GroundTruthEntry> ground_truth_from_json(std::string_view text) {
    using namespace jsonutil;
    const json doc = parse(text);
    if (!doc.is_array()) throw ValidationError("$", "expected an array of entries");
    std::vector<GroundTruthEntry> out;
    for (std::size_t k = 0; k < doc.size(); ++k) {
        const std::string at = "$[" + std::to_string(k) + "]";
        const auto& j = doc[k];
        require_object(j, at);
        GroundTruthEntry e;
        e.program = require_string(j, "program", at);
        e.version = require_string(j, "version", at);
        e.function = require_string(j, "function", at);
        if (e.function.empty()) throw ValidationError(at + ".function", "must be non-empty");
        try {
            e.vector = cvss3::parse_vector(require_string(j, "vector", at));
        } catch (const ParseError& err) {
            throw ValidationError(at + ".vector", err.what());
        }
        const auto prov = optional_string(j, "provenance", at).value_or("Manual");
        if (prov == "NVD") {
            e.provenance = Provenance::Nvd;
        } else if (prov == "Manual") {
            e.provenance = Provenance::Manual;
        } else {
            throw ValidationError(at + ".provenance", "expected \"NVD\" or \"Manual\"");
        }
        e.source_id = optional_string(j, "cve", at).value_or("");
        if (e.provenance == Provenance::Nvd && e.source_id.empty()) {
            throw ValidationError(at + ".cve", "NVD entries must name their CVE");
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace vulnscore::nvd
