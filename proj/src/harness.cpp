#include "rsl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rsl/probes.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rsl {

using nlohmann::json;
namespace fs = std::filesystem;

static const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// ExperimentConfig

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    try {
        c.model = ModelParams::from_json_string(j.at("model").dump());
        c.probe = j.value("probe", std::string("spectrum"));
        c.probe_params = j.value("probe_params", json::object());
        c.n_samples = j.value("n_samples", 100L);
        c.sample_offset = j.value("sample_offset", 0L);
        c.master_seed = j.value("master_seed", std::uint64_t{1});
        c.out_dir = j.value("out", std::string("out"));
        c.workers = j.value("workers", 1);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config schema error: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return from_json(j);
}

json ExperimentConfig::to_json() const {
    json j;
    j["model"] = json::parse(model.to_json_string());
    j["probe"] = probe;
    j["probe_params"] = probe_params;
    j["n_samples"] = n_samples;
    j["sample_offset"] = sample_offset;
    j["master_seed"] = master_seed;
    j["out"] = out_dir;
    j["workers"] = workers;
    return j;
}

void ExperimentConfig::validate() const {
    static const std::vector<std::string> known = {"spectrum",     "wegner", "minami",          "spacing_tail",
                                                   "poisson",      "dos",    "localization",    "cluster_flatness",
                                                   "cartan",       "good_config"};
    if (std::find(known.begin(), known.end(), probe) == known.end())
        throw ConfigError("unknown probe: " + probe);
    if (n_samples < 0) throw ConfigError("n_samples must be nonnegative");
    model.validate();
    if (probe_params.contains("deltas")) {
        for (double dlt : probe_params["deltas"].get<std::vector<double>>())
            if (!(dlt > 0.0)) throw ConfigError("delta grid values must be positive");
    }
    if (probe == "spacing_tail" || probe == "minami") {
        const Thresholds th = model.thresholds();
        const double cap = probe == "minami" ? th.E_M : th.E_spc;
        const double E = probe_params.value("E", 1.0);
        if (E > cap)
            std::cerr << "warning: probe energy " << E << " lies above the validity threshold (cap " << cap
                      << ")\n";
    }
}

// ---------------------------------------------------------------------------
// Records

std::string EnsembleRecord::to_line() const {
    json j;
    j["i"] = index;
    j["seed"] = seed;
    j["probe"] = probe;
    j["model"] = model_hash;
    j["ok"] = ok;
    if (ok)
        j["m"] = measurements;
    else
        j["err"] = error;
    return j.dump();
}

EnsembleRecord EnsembleRecord::from_line(const std::string& line) {
    json j = json::parse(line);
    EnsembleRecord r;
    r.index = j.at("i").get<long>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.probe = j.at("probe").get<std::string>();
    r.model_hash = j.at("model").get<std::uint64_t>();
    r.ok = j.at("ok").get<bool>();
    if (r.ok)
        r.measurements = j.at("m");
    else
        r.error = j.value("err", "");
    return r;
}

EnsembleRecord run_one_sample(const ExperimentConfig& cfg, long index) {
    EnsembleRecord rec;
    rec.index = index;
    rec.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(index));
    rec.probe = cfg.probe;
    rec.model_hash = cfg.model.hash();
    const auto t0 = std::chrono::steady_clock::now();
    try {
        rec.measurements = probe_sample(cfg, rec.seed);
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    rec.t_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

std::vector<EnsembleRecord> execute_samples_serial(const ExperimentConfig& cfg) {
    std::vector<EnsembleRecord> out(static_cast<std::size_t>(cfg.n_samples));
    for (long i = 0; i < cfg.n_samples; ++i) out[i] = run_one_sample(cfg, cfg.sample_offset + i);
    return out;
}

std::vector<EnsembleRecord> execute_samples_parallel(const ExperimentConfig& cfg) {
    std::vector<EnsembleRecord> out(static_cast<std::size_t>(cfg.n_samples));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(cfg.workers > 0 ? cfg.workers : omp_get_max_threads())
#endif
    for (long i = 0; i < cfg.n_samples; ++i) out[i] = run_one_sample(cfg, cfg.sample_offset + i);
    return out;
}

std::vector<EnsembleRecord> execute_samples(const ExperimentConfig& cfg) {
    if (cfg.workers == 1) return execute_samples_serial(cfg);
    return execute_samples_parallel(cfg);
}

namespace {

std::string timestamp_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace

RunSummary run_ensemble(const ExperimentConfig& cfg) {
    const std::string started = timestamp_now();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<EnsembleRecord> records = execute_samples(cfg);
    RunSummary s;
    s.n_total = cfg.n_samples;
    for (const auto& r : records)
        r.ok ? ++s.n_ok : ++s.n_failed;
    s.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    s.failure_budget_exceeded = s.n_total > 0 && 10 * s.n_failed > s.n_total;

    fs::create_directories(cfg.out_dir);
    s.records_path = (fs::path(cfg.out_dir) / "records.ndjson").string();
    s.manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();

    {
        // the record stream stays a pure function of (config, master_seed);
        // timing goes to a side file
        std::ofstream os(s.records_path);
        if (!os) throw ConfigError("cannot open for writing: " + s.records_path);
        for (const auto& r : records) os << r.to_line() << "\n";
    }
    {
        std::ofstream os((fs::path(cfg.out_dir) / "timings.csv").string());
        os << "i,t_ms\n";
        for (const auto& r : records) os << r.index << "," << r.t_ms << "\n";
    }
    {
        json m;
        m["config"] = cfg.to_json();
        m["version"] = kVersion;
        m["started"] = started;
        m["finished"] = timestamp_now();
        m["n_samples"] = s.n_total;
        m["n_failed"] = s.n_failed;
        m["duration_ms"] = s.total_ms;
        std::ofstream os(s.manifest_path);
        os << m.dump(2) << "\n";
    }
    return s;
}

std::vector<EnsembleRecord> load_records(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open record file: " + path);
    std::vector<EnsembleRecord> out;
    std::string line;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(EnsembleRecord::from_line(line));
        } catch (const json::exception&) {
            std::cerr << "warning: skipping truncated or corrupt record at " << path << ":" << lineno << "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Events and aggregation

WilsonInterval probability_probe(const std::vector<EnsembleRecord>& records, const EventSpec& event) {
    long succ = 0, n = 0;
    for (const auto& r : records) {
        if (!r.ok) continue;
        if (!r.measurements.contains(event.field))
            throw ConfigError("record lacks event field: " + event.field);
        const json& f = r.measurements.at(event.field);
        double v;
        if (f.is_array()) {
            if (event.index < 0 || event.index >= static_cast<long>(f.size()))
                throw ConfigError("event index out of range for field: " + event.field);
            v = f.at(event.index).get<double>();
        } else {
            v = f.get<double>();
        }
        if (event.kind == EventSpec::Kind::ValueBelow && r.measurements.value(event.field + "_inf", false))
            v = kInf;
        ++n;
        const bool hit =
            event.kind == EventSpec::Kind::CountAtLeast ? v >= event.threshold : v < event.threshold;
        if (hit) ++succ;
    }
    if (n == 0) throw ConfigError("probability_probe: no usable records");
    return wilson_interval(succ, n);
}

AggregateResult aggregate_statistics(const ExperimentConfig& cfg,
                                     const std::vector<std::vector<EnsembleRecord>>& streams) {
    if (streams.empty()) throw ConfigError("aggregate: no input streams");
    std::vector<EnsembleRecord> merged;
    for (const auto& s : streams) merged.insert(merged.end(), s.begin(), s.end());
    if (merged.empty()) throw ConfigError("aggregate: empty input");
    const std::uint64_t mh = merged.front().model_hash;
    const std::string pid = merged.front().probe;
    for (const auto& r : merged) {
        if (r.probe != pid) throw ConfigError("aggregate: mixed probe ids");
        if (r.model_hash != mh) throw ConfigError("aggregate: mixed model hashes");
    }
    std::sort(merged.begin(), merged.end(),
              [](const EnsembleRecord& a, const EnsembleRecord& b) { return a.index < b.index; });
    return probe_aggregate(cfg, merged);
}

void write_aggregate(const AggregateResult& agg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream os((fs::path(out_dir) / "summary.json").string());
        json j;
        j["probe"] = agg.probe;
        j["n_records"] = agg.n_records;
        j["summary"] = agg.summary;
        j["insufficient"] = agg.insufficient;
        os << j.dump(2) << "\n";
    }
    for (const auto& [name, rows] : agg.frequency_tables)
        write_frequency_csv((fs::path(out_dir) / (name + ".csv")).string(), rows);
    for (const auto& [name, rows] : agg.histogram_tables)
        write_histogram_csv((fs::path(out_dir) / (name + ".csv")).string(), rows);
    for (const auto& [name, content] : agg.extra_files) {
        std::ofstream os((fs::path(out_dir) / name).string());
        os << content;
    }
}

}  // namespace rsl
