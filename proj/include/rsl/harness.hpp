#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsl/model.hpp"
#include "rsl/spacing_stats.hpp"

namespace rsl {

struct ExperimentConfig {
    ModelParams model;
    std::string probe = "spectrum";
    nlohmann::json probe_params = nlohmann::json::object();
    long n_samples = 100;
    long sample_offset = 0;
    std::uint64_t master_seed = 1;
    std::string out_dir = "out";
    int workers = 1;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::json to_json() const;
    void validate() const;
};

struct EnsembleRecord {
    long index = 0;
    std::uint64_t seed = 0;
    std::string probe;
    std::uint64_t model_hash = 0;
    nlohmann::json measurements;
    bool ok = true;
    std::string error;
    double t_ms = 0.0;  // kept out of the serialized record stream

    std::string to_line() const;
    static EnsembleRecord from_line(const std::string& line);
};

/// Measurements for one sample; pure in (config, per-sample seed).
EnsembleRecord run_one_sample(const ExperimentConfig& cfg, long index);

std::vector<EnsembleRecord> execute_samples_serial(const ExperimentConfig& cfg);
std::vector<EnsembleRecord> execute_samples_parallel(const ExperimentConfig& cfg);
std::vector<EnsembleRecord> execute_samples(const ExperimentConfig& cfg);  // dispatch on workers

struct RunSummary {
    long n_total = 0;
    long n_ok = 0;
    long n_failed = 0;
    double total_ms = 0.0;
    std::string records_path;
    std::string manifest_path;
    bool failure_budget_exceeded = false;  // more than 10% of samples failed
};

/// Runs the ensemble, persists records (NDJSON), a manifest, and a timing
/// side file under cfg.out_dir.
RunSummary run_ensemble(const ExperimentConfig& cfg);

/// Reads a record stream; a truncated trailing record is skipped with a
/// warning on stderr.
std::vector<EnsembleRecord> load_records(const std::string& path);

// ---------------------------------------------------------------------------
// Events and aggregation

struct EventSpec {
    enum class Kind { CountAtLeast, ValueBelow };
    Kind kind = Kind::CountAtLeast;
    std::string field;    // measurement key; vector fields use `index`
    long index = -1;
    double threshold = 1.0;
};

/// Frequency of an event over records, with Wilson 95% interval.
WilsonInterval probability_probe(const std::vector<EnsembleRecord>& records, const EventSpec& event);

struct AggregateResult {
    std::string probe;
    long n_records = 0;
    nlohmann::json summary;                       // probe-specific scalars
    std::vector<std::pair<std::string, std::vector<FrequencyRow>>> frequency_tables;
    std::vector<std::pair<std::string, std::vector<HistogramRow>>> histogram_tables;
    std::vector<std::pair<std::string, std::string>> extra_files;  // (filename, csv content)
    bool insufficient = false;
};

/// Order-independent merge of record streams sharing probe id and model hash.
AggregateResult aggregate_statistics(const ExperimentConfig& cfg,
                                     const std::vector<std::vector<EnsembleRecord>>& streams);

/// Writes summary.json plus the CSV tables into out_dir.
void write_aggregate(const AggregateResult& agg, const std::string& out_dir);

}  // namespace rsl
