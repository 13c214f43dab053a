#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vulnscore/cvss3.hpp"

namespace vulnscore::nvd {

struct Product {
    std::string vendor;
    std::string product;
    std::string version;

    friend auto operator<=>(const Product&, const Product&) = default;
};

struct CveRecord {
    std::string id;
    std::string description;
    std::vector<std::string> cwe_ids;
    std::optional<cvss3::Vector> cvss3_vector;
    std::optional<cvss3::Score> cvss3_score;
    /// Verbatim vector string from the feed, kept for provenance checks.
    std::optional<std::string> cvss3_vector_text;
    std::vector<Product> products;
};

enum class Provenance { Nvd, Manual };

std::string_view provenance_name(Provenance p) noexcept;

struct GroundTruthEntry {
    std::string program;
    std::string version;
    std::string function;
    cvss3::Vector vector;
    Provenance provenance = Provenance::Manual;
    /// CVE id an NVD entry was derived from; empty for manual entries.
    std::string source_id;
};

/// Filter settings. An empty product allow-list admits every product.
struct FilterConfig {
    std::set<std::string> buffer_overflow_cwes{"CWE-119", "CWE-120", "CWE-121",
                                               "CWE-122", "CWE-125", "CWE-787"};
    std::set<std::string> product_allow_list;

    bool product_allowed(const Product& p) const;
};

/// Reads an NVD JSON 1.1 feed (`{"CVE_Items": [...]}`). Items whose CVSS v3
/// vector is not in 3.0 notation are kept with an absent vector. A 3.0 vector
/// whose stated base score disagrees with the computed one is rejected.
std::vector<CveRecord> parse_nvd_feed(std::string_view text);

/// Identifiers named by "in the X function", "in function X" or "X() function",
/// in order of first appearance, without duplicates.
std::vector<std::string> extract_function_names(std::string_view description);

/// Per-filter outcome of a record; `passes()` is the conjunction.
struct FilterVerdict {
    bool has_cvss3 = false;
    bool allowed_product = false;
    bool buffer_overflow = false;
    bool names_function = false;

    bool passes() const noexcept {
        return has_cvss3 && allowed_product && buffer_overflow && names_function;
    }
};

FilterVerdict evaluate_filters(const CveRecord& record, const FilterConfig& config);

/// Records passing all four filters, in input order.
std::vector<CveRecord> filter_records(const std::vector<CveRecord>& records,
                                      const FilterConfig& config = {});

/// Union of NVD-derived entries (one per record, allowed product and named
/// function) and manual entries. On a key clash NVD wins; two NVD records
/// assigning different vectors to one key raise ConflictError. Output is
/// sorted by (program, version, function).
std::vector<GroundTruthEntry> build_ground_truth(const std::vector<CveRecord>& records,
                                                 const std::vector<GroundTruthEntry>& manual,
                                                 const FilterConfig& config = {});

nlohmann::json ground_truth_to_json(const std::vector<GroundTruthEntry>& entries);
/// Accepts the same format ground_truth_to_json writes.
std::vector<GroundTruthEntry> ground_truth_from_json(std::string_view text);

}  // namespace vulnscore::nvd
