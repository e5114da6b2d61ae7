#pragma once

#include <optional>
#include <string>

#include "cbm/protocols.hpp"
#include "cbm/synthcohort.hpp"
#include "json.hpp"

namespace cbm {

inline constexpr const char* kVersion = "0.1.0";

/// Canonical config echo; excludes runtime-only knobs (threads), so reports
/// are byte-identical at any thread count.
nlohmann::json protocol_config_json(const ProtocolConfig& config);
nlohmann::json injection_config_json(const InjectionConfig& injection);
nlohmann::json generator_config_json(const GeneratorConfig& config);

/// FNV-1a 64 over the dumped canonical config, as 16 hex digits.
std::string config_hash_hex(const nlohmann::json& config);

nlohmann::json experiment_report_json(const ExperimentReport& report);
nlohmann::json injection_report_json(const InjectionReport& report);
nlohmann::json context_breakdown_json(const ContextBreakdown& breakdown);

void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

/// Plot-data series next to a report (CSV).
void write_report_users_csv(const ExperimentReport& report, const std::string& path);
void write_report_thresholds_csv(const ExperimentReport& report, const std::string& path);
void write_injection_sweep_csv(const InjectionReport& report, const std::string& path);

/// A run config is either a protocol run or an injection sweep over one
/// shared base (split/smote/classifier/seed).
struct RunConfig {
  ProtocolConfig protocol_config;
  std::optional<InjectionConfig> injection;
  bool with_context_breakdown = false;

  bool is_injection() const { return injection.has_value(); }
};

/// Strict parsers: unknown keys are rejected at every level.
RunConfig parse_run_config(const nlohmann::json& j);
GeneratorConfig parse_generator_config(const nlohmann::json& j);

}  // namespace cbm
