#ifndef DLOCK_CONFIG_HPP
#define DLOCK_CONFIG_HPP

#include <nlohmann/json.hpp>
#include <string>

#include "dlock/sim.hpp"

namespace dlock {

using Json = nlohmann::json;

inline constexpr int kConfigVersion = 1;
inline constexpr int kTrajectorySchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";

struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(const std::string& f, const std::string& msg)
        : std::runtime_error(msg + " (" + f + ")"), field(f) {}
};

// Fully materialized default config (the four-agent swap, adaptive mode).
Json config_defaults();

// Parses a config document; unknown fields rejected, missing fields filled
// from defaults. Throws ConfigError with the offending field path.
ScenarioConfig parse_config(const Json& j);

// Re-serializes a resolved config with every default materialized.
Json materialize_config(const ScenarioConfig& cfg);

// FNV-1a digest of the canonical materialized form.
std::string config_digest(const ScenarioConfig& cfg);

ControllerMode mode_from_string(const std::string& s);

// One row per step per agent; stable, versioned column set.
void write_trajectory_csv(const TrajectoryLog& log, const ScenarioConfig& cfg,
                          std::ostream& os, bool unicycle_cols = false,
                          double nid_l = 0.1);

Json summary_json(const TrajectoryLog& log, const ScenarioConfig& cfg);

}  // namespace dlock

#endif
