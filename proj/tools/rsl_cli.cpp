#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <fstream>

#include "CLI11.hpp"
#include "rsl/discretize.hpp"
#include "rsl/harness.hpp"
#include "rsl/probes.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolverBudget = 3;
constexpr int kExitInsufficient = 4;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    long samples = -1;
    long offset = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "experiment config (JSON)");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--samples", f.samples, "number of samples");
    cmd->add_option("--offset", f.offset, "index of the first sample");
    cmd->add_option("--seed", f.seed, "master seed")->each([&](const std::string&) { f.seed_set = true; });
    cmd->add_option("--workers", f.workers, "worker budget (1 = serial, 0 = all cores)");
}

rsl::ExperimentConfig make_config(const CommonFlags& f, const std::string& probe) {
    rsl::ExperimentConfig cfg;
    if (!f.config_path.empty()) {
        cfg = rsl::ExperimentConfig::from_file(f.config_path);
    } else {
        cfg.model = rsl::ModelParams{};  // 1-d flat-tile defaults
    }
    cfg.probe = probe;
    if (f.samples >= 0) cfg.n_samples = f.samples;
    if (f.offset >= 0) cfg.sample_offset = f.offset;
    if (f.seed_set) cfg.master_seed = f.seed;
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (f.workers > 0 || f.workers == 0) cfg.workers = f.workers == 0 ? 0 : f.workers;
    cfg.validate();
    return cfg;
}

int run_probe_command(const CommonFlags& f, const std::string& probe) {
    rsl::ExperimentConfig cfg = make_config(f, probe);
    rsl::RunSummary s = rsl::run_ensemble(cfg);
    std::cout << "samples: " << s.n_ok << " ok, " << s.n_failed << " failed ("
              << s.total_ms << " ms)\nrecords: " << s.records_path << "\n";
    if (s.failure_budget_exceeded) {
        std::cerr << "error: more than 10% of samples failed\n";
        return kExitSolverBudget;
    }
    auto records = rsl::load_records(s.records_path);
    rsl::AggregateResult agg = rsl::aggregate_statistics(cfg, {records});
    rsl::write_aggregate(agg, cfg.out_dir);
    std::cout << "summary: " << cfg.out_dir << "/summary.json\n";
    if (agg.insufficient) {
        std::cerr << "error: insufficient data for the probe's statistics\n";
        return kExitInsufficient;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-volume random Schrodinger operator laboratory"};
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* probe;
        const char* help;
    };
    const std::vector<Sub> subs = {
        {"spectrum", "spectrum", "eigenvalues below a cutoff for an ensemble"},
        {"spacing-tail", "spacing_tail", "P(spac_E < delta) over a delta grid"},
        {"wegner", "wegner", "P(at least one eigenvalue in I) over interval widths"},
        {"minami", "minami", "P(at least two eigenvalues in [E-delta, E+delta])"},
        {"poisson", "poisson", "unfolded eigenvalue statistics around E"},
        {"dos", "dos", "integrated density of states and its derivative"},
        {"localization", "localization", "eigenfunction decay diagnostics"},
        {"cluster-flatness", "cluster_flatness", "cluster flatness bound checks"},
        {"cartan", "cartan", "sublevel measure of small level spacing"},
        {"good-config", "good_config", "degeneracy-splitting configuration search"},
    };

    std::vector<CommonFlags> flags(subs.size() + 2);
    std::vector<CLI::App*> cmds;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        CLI::App* c = app.add_subcommand(subs[i].name, subs[i].help);
        add_common(c, flags[i]);
    cmds.push_back(c);
    }

    // sample: emit one spectrum record to stdout
    CommonFlags& f_sample = flags[subs.size()];
    long sample_index = 0;
    std::string matrix_path;
    CLI::App* c_sample = app.add_subcommand("sample", "emit one spectrum record");
    add_common(c_sample, f_sample);
    c_sample->add_option("--index", sample_index, "sample index");
    c_sample->add_option("--matrix", matrix_path, "also export the operator (Matrix Market)");

    // aggregate: merge record streams
    CommonFlags& f_agg = flags[subs.size() + 1];
    std::vector<std::string> record_files;
    CLI::App* c_agg = app.add_subcommand("aggregate", "merge record streams and emit CSV summaries");
    add_common(c_agg, f_agg);
    c_agg->add_option("records", record_files, "record files (NDJSON)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        for (std::size_t i = 0; i < subs.size(); ++i)
            if (cmds[i]->parsed()) return run_probe_command(flags[i], subs[i].probe);

        if (c_sample->parsed()) {
            rsl::ExperimentConfig cfg = make_config(f_sample, "spectrum");
            rsl::EnsembleRecord rec = rsl::run_one_sample(cfg, sample_index);
            std::cout << rec.to_line() << "\n";
            if (!matrix_path.empty()) {
                rsl::Configuration omega = rsl::sample_configuration(
                    cfg.model.density, cfg.model.lattice(), rec.seed);
                std::ofstream os(matrix_path);
                if (!os) throw rsl::ConfigError("cannot open for writing: " + matrix_path);
                rsl::export_matrix_market(rsl::assemble(cfg.model, omega), os);
            }
            return rec.ok ? kExitOk : kExitSolverBudget;
        }

        if (c_agg->parsed()) {
            rsl::ExperimentConfig cfg = make_config(f_agg, "spectrum");
            std::vector<std::vector<rsl::EnsembleRecord>> streams;
            for (const auto& p : record_files) streams.push_back(rsl::load_records(p));
            // aggregate under the probe recorded in the stream
            if (!streams.empty() && !streams.front().empty()) cfg.probe = streams.front().front().probe;
            rsl::AggregateResult agg = rsl::aggregate_statistics(cfg, streams);
            rsl::write_aggregate(agg, cfg.out_dir.empty() ? "out" : cfg.out_dir);
            std::cout << "merged " << agg.n_records << " records -> "
                      << (cfg.out_dir.empty() ? "out" : cfg.out_dir) << "/summary.json\n";
            return agg.insufficient ? kExitInsufficient : kExitOk;
        }
    } catch (const rsl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const rsl::PreconditionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolverBudget;
    }
    return kExitOk;
}
