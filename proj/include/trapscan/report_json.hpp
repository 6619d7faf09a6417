#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "trapscan/ablation.hpp"
#include "trapscan/scan.hpp"

// JSON serialization for reports. Uses ordered_json throughout so report
// files are byte-identical across runs with the same inputs.

namespace trapscan {

using Json = nlohmann::ordered_json;

inline constexpr const char* kScanReportSchema = "trapscan/scan-report/v1";
inline constexpr const char* kAblationResultSchema = "trapscan/ablation-result/v1";
inline constexpr const char* kDatasetSchema = "trapscan/dataset/v1";

Json mp_fit_to_json(const MPFit& fit);
Json trap_to_json(const TrapRecord& trap, bool include_eigenvector);
Json instability_to_json(const MeanInstabilityReport& report);
Json layer_report_to_json(const LayerTrapReport& report, const ScanOptions& options);
Json scan_report_to_json(const CheckpointScanReport& report, const ScanOptions& options);
Json options_to_json(const ScanOptions& options);
Json ablation_to_json(const AblationResult& result);
Json ablation_array_to_json(const std::vector<AblationResult>& results,
                            const struct AblateOptions* options = nullptr);

std::string ablation_csv(const std::vector<AblationResult>& results);

}  // namespace trapscan
