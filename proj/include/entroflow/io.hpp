#pragma once

#include "entroflow/control.hpp"
#include "entroflow/drift.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace entroflow {

/// Sectioned key-value config: [section] lines followed by key = value.
/// Unknown sections or keys are rejected by the loaders (no silent defaults).
struct ConfigFile {
    // section -> ordered (key, value) pairs; insertion order preserved.
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections;

    static ConfigFile parse(const std::string& text);
    static ConfigFile load(const std::filesystem::path& path);
    std::string serialize() const;

    bool has(const std::string& section) const;
    const std::vector<std::pair<std::string, std::string>>& section(const std::string& name) const;
};

/// Space file with sections [nodes], [edges], [measure], [params] and an
/// optional [distance]; or a generator reference (k2 / ring:n / grid:n).
Space load_space(const ConfigFile& cfg);
Space load_space_file(const std::filesystem::path& path);
std::string serialize_space(const Space& space);

/// Scenario file with sections [space], [horizon], [initial],
/// [running_cost], [terminal], [optimizer]. The loaded scenario owns its
/// space through this wrapper.
struct LoadedScenario {
    std::unique_ptr<Space> space;
    Scenario scenario;
};
LoadedScenario load_scenario(const ConfigFile& cfg);
LoadedScenario load_scenario_file(const std::filesystem::path& path);
std::string serialize_scenario(const Scenario& sc);

/// Curve CSV: header "s,node_0,...,node_{n-1}", one row per grid time.
std::string curve_to_csv(const MeasureCurve& curve);
MeasureCurve curve_from_csv(const Space& space, const std::string& csv);

/// Drift CSV: header "s,edge_0,...,edge_{E-1}", one row per interval
/// (s = interval start), values on the canonical edge orientations.
std::string drift_to_csv(const Space& space, const MeasureCurve& curve, const DriftField& drift);
DriftField drift_from_csv(const Space& space, const std::string& csv);

/// Shortest double representation that round-trips bit-exactly.
std::string format_double(double v);

/// Atomic write: temp file in the target directory, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// FNV-1a hash of a byte string, hex-encoded (scenario hashes in manifests).
std::string fnv1a_hex(const std::string& bytes);

}  // namespace entroflow
