#include "vulnscore/cvss3.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vulnscore/error.hpp"

namespace vulnscore::cvss3 {
namespace {

constexpr std::string_view kPrefix = "CVSS:3.0/";

struct MetricInfo {
    std::string_view name;
    std::string_view letters;  // indexed by enumerator ordinal
    std::array<std::string_view, 4> value_names;
    std::array<int, 4> severity;  // larger = more severe
};

// Severity: AV N>A>L>P, AC L>H, PR N>L>H, UI N>R, S C>U, C/I/A H>L>N.
constexpr std::array<MetricInfo, 8> kInfo{{
    {"AV", "NALP", {"Network", "Adjacent", "Local", "Physical"}, {3, 2, 1, 0}},
    {"AC", "LH", {"Low", "High", "", ""}, {1, 0, 0, 0}},
    {"PR", "NLH", {"None", "Low", "High", ""}, {2, 1, 0, 0}},
    {"UI", "NR", {"None", "Required", "", ""}, {1, 0, 0, 0}},
    {"S", "UC", {"Unchanged", "Changed", "", ""}, {0, 1, 0, 0}},
    {"C", "NLH", {"None", "Low", "High", ""}, {0, 1, 2, 0}},
    {"I", "NLH", {"None", "Low", "High", ""}, {0, 1, 2, 0}},
    {"A", "NLH", {"None", "Low", "High", ""}, {0, 1, 2, 0}},
}};

const MetricInfo& info(Metric m) noexcept { return kInfo[static_cast<std::size_t>(m)]; }

void check_value(Metric m, int value) {
    if (value < 0 || value >= value_count(m)) {
        throw DomainError("value " + std::to_string(value) + " out of range for metric " +
                          std::string(metric_name(m)));
    }
}

// CVSS v3.0 weights.
constexpr std::array<double, 4> kAttackVector{0.85, 0.62, 0.55, 0.20};
constexpr std::array<double, 2> kAttackComplexity{0.77, 0.44};
constexpr std::array<double, 3> kPrivilegesUnchanged{0.85, 0.62, 0.27};
constexpr std::array<double, 3> kPrivilegesChanged{0.85, 0.68, 0.50};
constexpr std::array<double, 2> kUserInteraction{0.85, 0.62};
constexpr std::array<double, 3> kImpact{0.00, 0.22, 0.56};

template <typename E>
constexpr std::size_t ord(E e) noexcept {
    return static_cast<std::size_t>(e);
}

}  // namespace

int Vector::get(Metric m) const noexcept {
    switch (m) {
        case Metric::AV: return static_cast<int>(av);
        case Metric::AC: return static_cast<int>(ac);
        case Metric::PR: return static_cast<int>(pr);
        case Metric::UI: return static_cast<int>(ui);
        case Metric::S: return static_cast<int>(s);
        case Metric::C: return static_cast<int>(c);
        case Metric::I: return static_cast<int>(i);
        case Metric::A: return static_cast<int>(a);
    }
    return 0;
}

void Vector::set(Metric m, int value) {
    check_value(m, value);
    const auto v = static_cast<std::uint8_t>(value);
    switch (m) {
        case Metric::AV: av = static_cast<AttackVector>(v); break;
        case Metric::AC: ac = static_cast<AttackComplexity>(v); break;
        case Metric::PR: pr = static_cast<PrivilegesRequired>(v); break;
        case Metric::UI: ui = static_cast<UserInteraction>(v); break;
        case Metric::S: s = static_cast<Scope>(v); break;
        case Metric::C: c = static_cast<Impact>(v); break;
        case Metric::I: i = static_cast<Impact>(v); break;
        case Metric::A: a = static_cast<Impact>(v); break;
    }
}

Score Score::from_tenths(int tenths) {
    if (tenths < 0 || tenths > 100) {
        throw DomainError("score out of range: " + std::to_string(tenths) + " tenths");
    }
    Score s;
    s.tenths_ = tenths;
    return s;
}

Rating Score::rating() const noexcept {
    if (tenths_ == 0) return Rating::None;
    if (tenths_ < 40) return Rating::Low;
    if (tenths_ < 70) return Rating::Medium;
    if (tenths_ < 90) return Rating::High;
    return Rating::Critical;
}

std::string Score::to_string() const {
    return std::to_string(tenths_ / 10) + "." + std::to_string(tenths_ % 10);
}

std::string_view metric_name(Metric m) noexcept { return info(m).name; }

Metric metric_from_name(std::string_view name) {
    for (Metric m : kMetrics) {
        if (info(m).name == name) return m;
    }
    throw ParseError("unknown metric '" + std::string(name) + "'");
}

int value_count(Metric m) noexcept { return static_cast<int>(info(m).letters.size()); }

char value_letter(Metric m, int value) {
    check_value(m, value);
    return info(m).letters[static_cast<std::size_t>(value)];
}

int value_from_letter(Metric m, char letter) {
    const auto pos = info(m).letters.find(letter);
    if (pos == std::string_view::npos) {
        throw ParseError("invalid value '" + std::string(1, letter) + "' for metric " +
                         std::string(metric_name(m)));
    }
    return static_cast<int>(pos);
}

std::string_view value_name(Metric m, int value) {
    check_value(m, value);
    return info(m).value_names[static_cast<std::size_t>(value)];
}

int severity_rank(Metric m, int value) {
    check_value(m, value);
    return info(m).severity[static_cast<std::size_t>(value)];
}

std::string_view rating_name(Rating r) noexcept {
    switch (r) {
        case Rating::None: return "None";
        case Rating::Low: return "Low";
        case Rating::Medium: return "Medium";
        case Rating::High: return "High";
        case Rating::Critical: return "Critical";
    }
    return "None";
}

Vector parse_vector(std::string_view text) {
    if (!text.starts_with(kPrefix)) {
        throw ParseError("missing 'CVSS:3.0/' prefix in '" + std::string(text) + "'");
    }
    std::string_view rest = text.substr(kPrefix.size());

    Vector v;
    std::array<bool, 8> seen{};
    while (!rest.empty()) {
        const auto slash = rest.find('/');
        const std::string_view token = rest.substr(0, slash);
        rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash + 1);
        if (slash != std::string_view::npos && rest.empty()) {
            throw ParseError("trailing '/' after '" + std::string(token) + "'");
        }

        const auto colon = token.find(':');
        if (colon == std::string_view::npos) {
            throw ParseError("malformed metric token '" + std::string(token) + "'");
        }
        const std::string_view key = token.substr(0, colon);
        const std::string_view value = token.substr(colon + 1);

        Metric m{};
        try {
            m = metric_from_name(key);
        } catch (const ParseError&) {
            throw ParseError("unknown metric key in '" + std::string(token) + "'");
        }
        if (value.size() != 1 || info(m).letters.find(value[0]) == std::string_view::npos) {
            throw ParseError("invalid value in '" + std::string(token) + "'");
        }
        auto& flag = seen[ord(m)];
        if (flag) {
            throw ParseError("duplicate metric '" + std::string(token) + "'");
        }
        flag = true;
        v.set(m, value_from_letter(m, value[0]));
    }

    for (Metric m : kMetrics) {
        if (!seen[ord(m)]) {
            throw ParseError("missing metric '" + std::string(metric_name(m)) + "' in '" +
                             std::string(text) + "'");
        }
    }
    return v;
}

std::string serialize_vector(const Vector& v) {
    std::string out(kPrefix);
    for (Metric m : kMetrics) {
        if (m != Metric::AV) out += '/';
        out += metric_name(m);
        out += ':';
        out += value_letter(m, v.get(m));
    }
    return out;
}

double unrounded_base_score(const Vector& v) noexcept {
    const double iss = 1.0 - (1.0 - kImpact[ord(v.c)]) * (1.0 - kImpact[ord(v.i)]) *
                                 (1.0 - kImpact[ord(v.a)]);
    const bool changed = v.s == Scope::Changed;
    const double impact =
        changed ? 7.52 * (iss - 0.029) - 3.25 * std::pow(iss - 0.02, 15) : 6.42 * iss;
    const auto& privileges = changed ? kPrivilegesChanged : kPrivilegesUnchanged;
    const double exploitability = 8.22 * kAttackVector[ord(v.av)] *
                                  kAttackComplexity[ord(v.ac)] * privileges[ord(v.pr)] *
                                  kUserInteraction[ord(v.ui)];
    if (impact <= 0.0) return 0.0;
    const double sum = changed ? 1.08 * (impact + exploitability) : impact + exploitability;
    return std::min(sum, 10.0);
}

int round_up_tenths(double x) noexcept {
    const double scaled = x * 10.0;
    const double nearest = std::round(scaled);
    if (std::abs(scaled - nearest) < 1e-9) return static_cast<int>(nearest);
    return static_cast<int>(std::ceil(scaled));
}

Score base_score(const Vector& v) noexcept {
    return Score::from_tenths(round_up_tenths(unrounded_base_score(v)));
}

std::vector<Vector> all_vectors() {
    std::vector<Vector> out;
    out.reserve(2592);
    Vector v;
    // Odometer over the metrics with A varying fastest.
    std::array<int, 8> digits{};
    for (;;) {
        for (std::size_t k = 0; k < kMetrics.size(); ++k) v.set(kMetrics[k], digits[k]);
        out.push_back(v);
        std::size_t k = kMetrics.size();
        while (k > 0) {
            --k;
            if (++digits[k] < value_count(kMetrics[k])) break;
            digits[k] = 0;
            if (k == 0) return out;
        }
    }
}

}  // namespace vulnscore::cvss3
