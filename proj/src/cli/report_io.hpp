#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scoremix/alignment_metrics.hpp"
#include "scoremix/class_selection.hpp"
#include "scoremix/gen_eval_metrics.hpp"
#include "scoremix/mplet_miner.hpp"
#include "scoremix/order_preservation.hpp"
#include "scoremix/scoremix_sampler.hpp"

namespace smx::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "0.3.0";

std::string sha256_file(const std::filesystem::path& path);

json to_json(const AlignmentScore& s);
json to_json(const MinerStats& s);
json to_json(const MpletReport& r);
json to_json(const VerificationReport& v);
json to_json(const PreservationReport& p);
json to_json(const SimulationResult& s);
json to_json(const OverlapAnalysis& o, bool include_pairs);
json to_json(const SelectionResult& r);
json to_json(const EvalMetrics& m);
json to_json(const NoiseSchedule& s);

void write_text(const std::filesystem::path& path, const std::string& text);

std::string mplet_csv(const MpletReport& r);
std::string pair_lists_csv(const DistancePairLists& lists);
std::string overlap_pairs_csv(const OverlapAnalysis& o);
std::string selection_csv(const SelectionResult& r);
std::string manifest_csv(const std::vector<ManifestRow>& rows);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace smx::cli
