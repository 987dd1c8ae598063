#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpo/config.hpp"

namespace fpo {

// Line-oriented dataset files: the first line is a header object
//   {"format": ..., "schema_version": N, "config_hash": "<16 hex>"}
// and every following line is one record. See docs/formats.md.
inline constexpr int kRecordSchemaVersion = 1;

namespace format {
inline constexpr std::string_view kSft = "fpo.sft";
inline constexpr std::string_view kSamples = "fpo.samples";
inline constexpr std::string_view kPairs = "fpo.pairs";
}  // namespace format

nlohmann::json to_json(const ErrorSpan& s);
ErrorSpan span_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SftExample& e);
SftExample sft_from_json(const nlohmann::json& j);

// A scored prompt group together with the selection decision made on it.
nlohmann::json group_to_json(const PromptGroup& group, const GroupResult& result,
                             const PairBuildConfig& config);
PromptGroup group_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PreferencePair& p);
PreferencePair pair_from_json(const nlohmann::json& j);

void write_records(const std::string& path, std::string_view format, std::uint64_t config_hash,
                   const std::vector<nlohmann::json>& records);

// Throws InputError when the file is missing, the format differs, or the
// header hash differs from `expected_hash`; the schema version must match.
std::vector<nlohmann::json> read_records(const std::string& path, std::string_view format,
                                         std::optional<std::uint64_t> expected_hash);

// "# schema_version=N config_hash=H" as the first line of every CSV.
std::string csv_preamble(std::uint64_t config_hash);

std::string loss_log_csv(const std::vector<StepLog>& log, std::uint64_t config_hash);

std::string eval_reports_csv(const std::vector<std::pair<std::string, EvalReport>>& reports,
                             std::uint64_t config_hash);
nlohmann::json eval_report_json(const EvalReport& r);

std::string sweep_rows_csv(const SweepReport& report, std::uint64_t config_hash);
std::string sweep_cells_csv(const SweepReport& report, std::uint64_t config_hash);

// Shortest round-trip decimal form of a double.
std::string format_double(double x);

void write_text(const std::string& path, const std::string& content);

}  // namespace fpo
