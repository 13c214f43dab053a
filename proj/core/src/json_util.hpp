#pragma once

// Schema-checking helpers shared by the JSON readers. Every failure raises a
// ValidationError naming the JSON path of the offending member.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "vulnscore/error.hpp"

namespace vulnscore::jsonutil {

using json = nlohmann::json;

inline json parse(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
}

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ValidationError(path, "expected an object");
}

inline const json& require_member(const json& j, const char* key, const std::string& path) {
    require_object(j, path);
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(path + "." + key, "missing required member");
    return *it;
}

inline std::string require_string(const json& j, const char* key, const std::string& path) {
    const auto& v = require_member(j, key, path);
    if (!v.is_string()) throw ValidationError(path + "." + key, "expected a string");
    return v.get<std::string>();
}

inline bool require_bool(const json& j, const char* key, const std::string& path) {
    const auto& v = require_member(j, key, path);
    if (!v.is_boolean()) throw ValidationError(path + "." + key, "expected a boolean");
    return v.get<bool>();
}

inline std::uint64_t as_uint(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        const auto n = v.get<std::int64_t>();
        if (n >= 0) return static_cast<std::uint64_t>(n);
    }
    throw ValidationError(path, "expected a non-negative integer");
}

inline std::uint64_t require_uint(const json& j, const char* key, const std::string& path) {
    return as_uint(require_member(j, key, path), path + "." + key);
}

inline const json& require_array(const json& j, const char* key, const std::string& path) {
    const auto& v = require_member(j, key, path);
    if (!v.is_array()) throw ValidationError(path + "." + key, "expected an array");
    return v;
}

inline std::optional<std::string> optional_string(const json& j, const char* key,
                                                  const std::string& path) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ValidationError(path + "." + key, "expected a string");
    return it->get<std::string>();
}

inline std::optional<std::uint64_t> optional_uint(const json& j, const char* key,
                                                  const std::string& path) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return as_uint(*it, path + "." + key);
}

}  // namespace vulnscore::jsonutil
