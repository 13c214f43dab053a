#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vulnscore::cvss3 {

/// The eight CVSS v3.0 base metrics, in vector-string order.
enum class Metric : std::uint8_t { AV, AC, PR, UI, S, C, I, A };

inline constexpr std::array<Metric, 8> kMetrics{Metric::AV, Metric::AC, Metric::PR, Metric::UI,
                                                Metric::S,  Metric::C,  Metric::I,  Metric::A};

enum class AttackVector : std::uint8_t { Network, Adjacent, Local, Physical };
enum class AttackComplexity : std::uint8_t { Low, High };
enum class PrivilegesRequired : std::uint8_t { None, Low, High };
enum class UserInteraction : std::uint8_t { None, Required };
enum class Scope : std::uint8_t { Unchanged, Changed };
/// Shared by confidentiality, integrity and availability.
enum class Impact : std::uint8_t { None, Low, High };

struct Vector {
    AttackVector av = AttackVector::Network;
    AttackComplexity ac = AttackComplexity::Low;
    PrivilegesRequired pr = PrivilegesRequired::None;
    UserInteraction ui = UserInteraction::None;
    Scope s = Scope::Unchanged;
    Impact c = Impact::None;
    Impact i = Impact::None;
    Impact a = Impact::None;

    /// Generic access by metric. Values are the enumerator ordinals above.
    int get(Metric m) const noexcept;
    void set(Metric m, int value);

    friend bool operator==(const Vector&, const Vector&) = default;
};

enum class Rating : std::uint8_t { None, Low, Medium, High, Critical };

/// A base score held as integer tenths so that it is exactly one decimal.
class Score {
public:
    constexpr Score() = default;
    /// Throws DomainError outside [0, 100].
    static Score from_tenths(int tenths);

    constexpr int tenths() const noexcept { return tenths_; }
    double value() const noexcept { return tenths_ / 10.0; }
    Rating rating() const noexcept;

    /// "9.8", "10.0", "0.0".
    std::string to_string() const;

    friend constexpr auto operator<=>(const Score&, const Score&) = default;

private:
    int tenths_ = 0;
};

std::string_view metric_name(Metric m) noexcept;
/// Accepts "AV", "AC", ... ; throws ParseError otherwise.
Metric metric_from_name(std::string_view name);

/// Number of allowed values of a metric (4 for AV, 2 for AC, ...).
int value_count(Metric m) noexcept;
/// Single-letter vector code of a value, e.g. 'N' for AV Network.
char value_letter(Metric m, int value);
/// Inverse of value_letter; throws ParseError for letters outside the metric.
int value_from_letter(Metric m, char letter);
/// Human-readable value name ("Network", "Required", ...).
std::string_view value_name(Metric m, int value);
/// Larger means more severe. Used to break ties conservatively.
int severity_rank(Metric m, int value);

std::string_view rating_name(Rating r) noexcept;

/// Parses "CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H".
Vector parse_vector(std::string_view text);
std::string serialize_vector(const Vector& v);

/// Base score before the final round-up. Exposed for property tests.
double unrounded_base_score(const Vector& v) noexcept;
Score base_score(const Vector& v) noexcept;

/// Ceiling to one decimal, returned as tenths.
int round_up_tenths(double x) noexcept;

/// Every one of the 2,592 base vectors in lexicographic metric order.
std::vector<Vector> all_vectors();

}  // namespace vulnscore::cvss3
