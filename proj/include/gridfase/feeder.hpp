#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace gridfase {

using Complex = std::complex<double>;

inline constexpr int kPhaseCount = 3;
inline constexpr int kFeederSchemaVersion = 1;

/// Subset of {A, B, C}, bit p set when phase p is present.
class PhaseSet {
public:
    constexpr PhaseSet() = default;
    constexpr explicit PhaseSet(std::uint8_t bits) : bits_(bits & 0x7u) {}

    /// Parses "ABC", "AC", "b", ... Throws std::invalid_argument on other characters or an empty set.
    static PhaseSet parse(std::string_view text);

    constexpr bool has(int phase) const { return (bits_ >> phase) & 1u; }
    constexpr int count() const { return ((bits_ >> 0) & 1) + ((bits_ >> 1) & 1) + ((bits_ >> 2) & 1); }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr bool subset_of(PhaseSet other) const { return (bits_ & ~other.bits_) == 0; }
    constexpr std::uint8_t bits() const { return bits_; }
    std::string str() const;

    friend constexpr bool operator==(PhaseSet, PhaseSet) = default;

private:
    std::uint8_t bits_ = 0;
};

char phase_letter(int phase);
/// 'A'/'a' -> 0 ... Throws std::invalid_argument.
int parse_phase(std::string_view text);

struct Bus {
    std::string id;
    PhaseSet phases;
    double base_kv = 0.0;  ///< line-to-line voltage base of the bus's zone

    friend bool operator==(const Bus&, const Bus&) = default;
};

struct Branch {
    std::string id;
    std::string from;
    std::string to;
    PhaseSet phases;
    /// Series phase impedance in ohms (already scaled by length), referred to the
    /// voltage base of the sending bus. Rows/columns of absent phases are zero.
    Eigen::Matrix3cd z_ohm = Eigen::Matrix3cd::Zero();

    friend bool operator==(const Branch& a, const Branch& b) {
        return a.id == b.id && a.from == b.from && a.to == b.to && a.phases == b.phases && a.z_ohm == b.z_ohm;
    }
};

/// Constant-PQ wye load on one phase.
struct Load {
    std::string bus;
    int phase = 0;
    double p_kw = 0.0;
    double q_kvar = 0.0;

    friend bool operator==(const Load&, const Load&) = default;
};

/// Distributed generator, modeled as a negative constant-PQ load.
struct Der {
    std::string bus;
    int phase = 0;
    double rated_kw = 0.0;
    double power_factor = 1.0;

    friend bool operator==(const Der&, const Der&) = default;
};

struct SlackVoltage {
    double vmag_pu = 1.0;
    std::array<double, 3> vang_rad{};  ///< per phase A, B, C

    friend bool operator==(const SlackVoltage&, const SlackVoltage&) = default;
};

struct FeederModel {
    int schema_version = kFeederSchemaVersion;
    std::string name;
    double base_kva = 0.0;  ///< three-phase power base
    double base_kv = 0.0;   ///< default line-to-line voltage base
    std::string slack_bus;
    SlackVoltage slack;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Load> loads;
    std::vector<Der> ders;

    std::optional<int> find_bus(std::string_view id) const;
    std::optional<int> find_branch(std::string_view id) const;
    int bus_index(std::string_view id) const;     ///< throws ValidationError when missing
    int branch_index(std::string_view id) const;  ///< throws ValidationError when missing

    friend bool operator==(const FeederModel&, const FeederModel&) = default;
};

/// Parent map and depth-ordered bus list rooted at the slack bus.
struct TopologyOrder {
    std::vector<int> order;          ///< bus indices, non-decreasing depth, ties by bus id
    std::vector<int> parent_branch;  ///< per bus, -1 for the slack bus
    std::vector<int> parent_bus;     ///< per bus, -1 for the slack bus
    std::vector<int> depth;          ///< per bus
    int max_depth = 0;
};

FeederModel parse_feeder(std::string_view text, std::string_view source = "<memory>");
FeederModel load_feeder(const std::filesystem::path& path);
std::string serialize_feeder(const FeederModel& model);

/// Checks every structural invariant; throws ValidationError on the first violation.
void validate_feeder(const FeederModel& model);

TopologyOrder topology_order(const FeederModel& model);

}  // namespace gridfase
