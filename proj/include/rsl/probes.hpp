#pragma once

#include <cstdint>

#include "json.hpp"
#include "rsl/harness.hpp"
#include "rsl/model.hpp"

namespace rsl {

/// One sample's measurements for the configured probe; pure in
/// (cfg, sample_seed). Throws on per-sample solver failure.
nlohmann::json probe_sample(const ExperimentConfig& cfg, std::uint64_t sample_seed);

/// Probe-specific fold over loaded records.
AggregateResult probe_aggregate(const ExperimentConfig& cfg, const std::vector<EnsembleRecord>& records);

}  // namespace rsl
