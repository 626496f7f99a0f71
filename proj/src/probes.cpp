#include "rsl/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include "rsl/cluster.hpp"
#include "rsl/discretize.hpp"
#include "rsl/localization.hpp"
#include "rsl/spacing_stats.hpp"
#include "rsl/spectral.hpp"

namespace rsl {

using nlohmann::json;

namespace {

double volume(const ModelParams& m) { return std::pow(m.L, m.d); }

Spectrum sample_spectrum(const ExperimentConfig& cfg, std::uint64_t seed, double E_max,
                         bool vectors = false) {
    Configuration omega = sample_configuration(cfg.model.density, cfg.model.lattice(), seed);
    SparseSymOperator A = assemble(cfg.model, omega);
    EigsOptions opt;
    opt.want_vectors = vectors;
    return eigs_below(A, E_max, opt);
}

std::vector<double> delta_grid(const ExperimentConfig& cfg, std::initializer_list<double> fallback) {
    if (cfg.probe_params.contains("deltas")) return cfg.probe_params["deltas"].get<std::vector<double>>();
    return fallback;
}

// --------------------------- per-sample probes -----------------------------

json probe_spectrum(const ExperimentConfig& cfg, std::uint64_t seed) {
    const double E = cfg.probe_params.value("E_max", cfg.model.thresholds().E_spc);
    Spectrum s = sample_spectrum(cfg, seed, E);
    json m;
    m["eigenvalues"] = s.eigenvalues;
    const double sp = spacing_below(s, E);
    m["spac"] = std::isfinite(sp) ? sp : 0.0;
    m["spac_inf"] = !std::isfinite(sp);
    return m;
}

json probe_wegner(const ExperimentConfig& cfg, std::uint64_t seed) {
    const double E = cfg.probe_params.value("E", 1.0);
    std::vector<double> widths =
        cfg.probe_params.value("widths", std::vector<double>{0.16, 0.08, 0.04});
    const double wmax = *std::max_element(widths.begin(), widths.end());
    Spectrum s = sample_spectrum(cfg, seed, E + wmax);
    json counts = json::array();
    for (double w : widths)
        counts.push_back(s.count_in(Interval::centered(E, w / 2.0)));
    json m;
    m["counts"] = counts;
    return m;
}

json probe_minami(const ExperimentConfig& cfg, std::uint64_t seed) {
    const double E = cfg.probe_params.value("E", 1.0);
    std::vector<double> deltas = delta_grid(cfg, {0.32, 0.16, 0.08, 0.04, 0.02, 0.01});
    const double dmax = *std::max_element(deltas.begin(), deltas.end());
    const double dclone = cfg.probe_params.value("clone_delta", *std::min_element(deltas.begin(), deltas.end()));
    long K = cfg.probe_params.value("clones", 0L);
    if (K <= 0) K = std::max<long>(1, static_cast<long>(std::floor(1.0 / (2.0 * volume(cfg.model) * dclone))));
    K = std::min<long>(K, 16);
    Spectrum s = sample_spectrum(cfg, seed, E + dmax + 2.0 * dclone * (K + 1));
    json m;
    json counts = json::array();
    for (double dlt : deltas) counts.push_back(s.count_in(Interval::centered(E, dlt)));
    m["counts"] = counts;
    json clones = json::array();
    for (long i = 1; i <= K; ++i) {
        Interval J = Interval::centered(E, dclone).shifted((i - 1) * 2.0 * dclone);
        clones.push_back(s.count_in(J));
    }
    m["clone_counts"] = clones;
    return m;
}

json probe_spacing_tail(const ExperimentConfig& cfg, std::uint64_t seed) {
    const double E = cfg.probe_params.value("E", cfg.model.thresholds().E_spc);
    Spectrum s = sample_spectrum(cfg, seed, E);
    const double sp = spacing_below(s, E);
    bool degenerate = false;
    for (const auto& [v, mult] : s.multiplicity_groups())
        if (mult >= 2) degenerate = true;
    json m;
    m["spac"] = std::isfinite(sp) ? sp : 0.0;
    m["spac_inf"] = !std::isfinite(sp);
    m["n_below"] = static_cast<long>(s.eigenvalues.size());
    m["degenerate"] = degenerate;
    return m;
}

json probe_poisson(const ExperimentConfig& cfg, std::uint64_t seed) {
    const double E = cfg.probe_params.value("E", 0.5);
    std::vector<double> B = cfg.probe_params.value("B", std::vector<double>{-4.0, 4.0});
    const double vol = volume(cfg.model);
    // generous margin above the window so every in-window eigenvalue has its
    // successor available for the gap sample
    Spectrum s = sample_spectrum(cfg, seed, E + B[1] / vol + 0.5);
    json m;
    m["count"] = unfolded_counts(s, E, cfg.model.L, cfg.model.d, {B[0], B[1]});
    // gap from each eigenvalue in the window to its successor (the successor
    // may sit beyond the window; clipping both ends would bias against long
    // gaps)
    std::vector<double> unfolded;
    for (double v : s.eigenvalues) unfolded.push_back(vol * (v - E));
    std::vector<double> sp;
    for (std::size_t i = 0; i + 1 < unfolded.size(); ++i)
        if (unfolded[i] >= B[0] && unfolded[i] <= B[1]) sp.push_back(unfolded[i + 1] - unfolded[i]);
    m["spacings"] = sp;
    return m;
}

json probe_dos(const ExperimentConfig& cfg, std::uint64_t seed) {
    const double e0 = cfg.probe_params.value("e_min", 0.0);
    const double e1 = cfg.probe_params.value("e_max", cfg.model.thresholds().E_spc);
    const long pts = cfg.probe_params.value("points", 33L);
    Spectrum s = sample_spectrum(cfg, seed, e1);
    json counts = json::array();
    for (long g = 0; g < pts; ++g) {
        const double e = e0 + (e1 - e0) * static_cast<double>(g) / (pts - 1);
        counts.push_back(static_cast<long>(std::upper_bound(s.eigenvalues.begin(), s.eigenvalues.end(), e) -
                                           s.eigenvalues.begin()));
    }
    json m;
    m["counts"] = counts;
    return m;
}

json probe_localization(const ExperimentConfig& cfg, std::uint64_t seed) {
    const long q = cfg.probe_params.value("n_eigs", 3L);
    Configuration omega = sample_configuration(cfg.model.density, cfg.model.lattice(), seed);
    SparseSymOperator A = assemble(cfg.model, omega);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.to_dense());
    json eigs = json::array();
    for (long i = 0; i < std::min<long>(q, A.n); ++i) {
        Eigen::VectorXd psi = es.eigenvectors().col(i);
        psi.normalize();
        EigenfunctionProfile prof = local_norms(psi, A);
        prof.eigenvalue = es.eigenvalues()[i];
        bool tie = false;
        GridIndex center = localization_center(prof, &tie);
        DecayFit fit = decay_rate_fit(prof);
        json e;
        e["lambda"] = prof.eigenvalue;
        e["m_prime"] = fit.m_prime;
        e["r2"] = fit.r_squared;
        e["sufficient"] = fit.sufficient;
        e["center"] = {center[0], center[1], center[2]};
        e["tie"] = tie;
        eigs.push_back(e);
    }
    json m;
    m["eigs"] = eigs;
    return m;
}

json probe_cluster_flatness(const ExperimentConfig& cfg, std::uint64_t seed) {
    const double eps = cfg.probe_params.value("epsilon", 0.02);
    const double E_max = cfg.probe_params.value("E_max", cfg.model.thresholds().E_spc);
    const long max_clusters = cfg.probe_params.value("max_clusters", 2L);
    const int grid_points = cfg.probe_params.value("grid_points", 41);

    Configuration omega = sample_configuration(cfg.model.density, cfg.model.lattice(), seed);
    SparseSymOperator A = assemble(cfg.model, omega);
    Spectrum s = eigs_below(A, E_max + 10.0 * eps);
    ClusterDecomposition dec = find_clusters(s, eps, E_max);

    Eigen::MatrixXd Ad = A.to_dense();
    json clusters = json::array();
    long used = 0;
    for (const auto& c : dec.clusters) {
        if (used >= max_clusters) break;
        const long n = static_cast<long>(c.end - c.begin);
        if (n < 2) continue;
        if (c.enclosing.length() > 0.5) continue;
        if (std::min(c.gap_below, c.gap_above) < 6.0 * eps) continue;
        ClusterWindow win{c.enclosing, eps, 0};
        try {
            win.validate_against(Ad);
        } catch (const PreconditionError&) {
            continue;
        }
        // direction with the largest mean overlap with the cluster
        Eigen::MatrixXd Q = spectral_projection(Ad, win.I);
        std::size_t kstar = 0;
        double best = -1.0;
        for (std::size_t k = 0; k < omega.indices.size(); ++k) {
            Eigen::VectorXd vk(A.n);
            for (long i = 0; i < A.n; ++i)
                vk[i] = cfg.model.bump.translated(A.node[i].data(), omega.indices[k], cfg.model.d);
            const double overlap = (Q.transpose() * vk.asDiagonal() * Q).trace();
            if (overlap > best + 1e-15) {
                best = overlap;
                kstar = k;
            }
        }
        ParamFamily fam;
        fam.A = Ad;
        Eigen::VectorXd vk(A.n);
        for (long i = 0; i < A.n; ++i)
            vk[i] = cfg.model.bump.translated(A.node[i].data(), omega.indices[kstar], cfg.model.d);
        fam.directions.push_back(Eigen::MatrixXd(vk.asDiagonal()));
        fam.epsilon = eps;
        FlatnessReport rep = cluster_flatness(fam, win, 0, grid_points, 1);
        json cj;
        cj["n"] = n;
        cj["delta"] = rep.delta;
        cj["sup_norm"] = rep.sup_norm;
        cj["bound"] = rep.bound;
        cj["hypothesis_ok"] = rep.hypothesis_ok;
        cj["violated"] = rep.violated;
        clusters.push_back(cj);
        ++used;
    }
    json m;
    m["clusters"] = clusters;
    return m;
}

json probe_cartan(const ExperimentConfig& cfg, std::uint64_t seed) {
    const double eps = cfg.probe_params.value("epsilon", 0.02);
    const double delta = cfg.probe_params.value("delta", 1e-4);
    const double E_max = cfg.probe_params.value("E_max", cfg.model.thresholds().E_spc);
    const long draws = cfg.probe_params.value("n_draws", 200L);

    Configuration omega = sample_configuration(cfg.model.density, cfg.model.lattice(), seed);
    SparseSymOperator A = assemble(cfg.model, omega);
    Spectrum s = eigs_below(A, E_max + 10.0 * eps);
    ClusterDecomposition dec = find_clusters(s, eps, E_max);

    json m;
    m["found_cluster"] = false;
    for (const auto& c : dec.clusters) {
        const long n = static_cast<long>(c.end - c.begin);
        if (n < 2 || c.enclosing.length() > 0.5) continue;
        if (std::min(c.gap_below, c.gap_above) < 6.0 * eps) continue;
        Interval Ie = c.enclosing.inflated(eps);
        const double spac0 = spacing(s, Ie);

        // sublevel sampling of the coupling cube around omega
        long hits = 0;
        for (long t = 0; t < draws; ++t) {
            std::mt19937_64 eng(splitmix64(derive_seed(seed ^ 0xca27a4ULL, static_cast<std::uint64_t>(t))));
            Configuration w = omega;
            for (double& v : w.values) v += eps * (2.0 * u01(eng) - 1.0);
            w.out_of_support = true;  // shifted draws may leave [0,1]
            SparseSymOperator At = assemble(cfg.model, w);
            Spectrum st = eigs_below(At, Ie.hi + 2.0 * eps);
            if (spacing(st, Ie) < delta) ++hits;
        }
        WilsonInterval wi = wilson_interval(hits, draws);
        m["found_cluster"] = true;
        m["n"] = n;
        m["measure"] = wi.p_hat;
        m["ci_low"] = wi.lo;
        m["ci_high"] = wi.hi;
        m["hits"] = hits;
        m["draws"] = draws;
        m["witness_spacing"] = std::isfinite(spac0) ? spac0 : 0.0;
        m["conditioned"] = std::isfinite(spac0) && spac0 > delta;
        m["log_ratio"] =
            (spac0 > 0.0 && std::isfinite(spac0)) ? std::abs(std::log(delta) / std::log(spac0)) : 0.0;
        break;
    }
    return m;
}

json probe_good_config(const ExperimentConfig& cfg, std::uint64_t seed) {
    const ModelParams& p = cfg.model;
    const double ell = cfg.probe_params.value("ell", p.L);
    const double r = cfg.probe_params.value("r", 3.0);
    auto lattice = p.lattice();

    // symmetric seed configuration: in 2-d the full dihedral symmetry of the
    // square protects an exactly degenerate pair (2-dim irreducible
    // representation); in 1-d a mirror double well gives a tunneling pair
    Configuration omega;
    omega.indices = lattice;
    omega.seed = seed;
    omega.values.assign(lattice.size(), 0.0);
    std::mt19937_64 eng(splitmix64(seed));
    if (p.d == 2) {
        std::map<std::pair<int, int>, double> canon;
        for (const auto& k : lattice) {
            auto key = std::minmax(std::abs(k[0]), std::abs(k[1]));
            if (!canon.count(key)) canon[key] = p.density.inverse_cdf(u01(eng));
        }
        for (std::size_t i = 0; i < lattice.size(); ++i)
            omega.values[i] = canon[std::minmax(std::abs(lattice[i][0]), std::abs(lattice[i][1]))];
    } else {
        // mirror-symmetric barrier with two wells
        const int well = std::max(1, static_cast<int>(std::lround(p.L / 4.0)));
        std::map<int, double> canon;
        for (const auto& k : lattice) {
            int a = std::abs(k[0]);
            if (!canon.count(a)) canon[a] = 0.9 + 0.1 * p.density.inverse_cdf(u01(eng));
        }
        for (std::size_t i = 0; i < lattice.size(); ++i) {
            int a = std::abs(lattice[i][0]);
            omega.values[i] = (a == well) ? 0.0 : canon[a];
        }
    }

    SparseSymOperator A = assemble(p, omega);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.to_dense(), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();

    // most degenerate low pair
    long pick = -1;
    double best_gap = kInf;
    const long scan = std::min<long>(ev.size() - 1, 8);
    for (long i = 0; i < scan; ++i) {
        const double g = ev[i + 1] - ev[i];
        if (g < best_gap) {
            best_gap = g;
            pick = i;
        }
    }
    json m;
    if (pick < 0) {
        m["found_pair"] = false;
        return m;
    }
    const double pad = 1e-7;
    Interval window{ev[pick] - pad, ev[pick + 1] + pad};
    double gap_rest = kInf;
    for (long i = 0; i < ev.size(); ++i) {
        if (i == pick || i == pick + 1) continue;
        gap_rest = std::min(gap_rest, std::min(std::abs(ev[i] - ev[pick]), std::abs(ev[i] - ev[pick + 1])));
    }
    const double eps = std::min(1.0 / 13.0, cfg.probe_params.value("epsilon", gap_rest / 8.5));

    GoodConfigOptions opt;
    opt.r = r;
    GoodConfigResult res = search_good_configuration(p, omega, {0.0, 0.0, 0.0}, ell, eps, window, opt);
    m["found_pair"] = true;
    m["seed_spacing"] = res.seed_spacing;
    m["achieved"] = std::isfinite(res.achieved_spacing) ? res.achieved_spacing : 0.0;
    m["improved"] = res.seed_spacing > 0.0 ? res.achieved_spacing / res.seed_spacing
                                           : (res.achieved_spacing > 0.0 ? 1e300 : 0.0);
    m["in_cube"] = res.in_cube;
    m["complete"] = res.complete;
    m["evals"] = res.evals;
    m["reference_bound"] = res.reference_bound;
    return m;
}

}  // namespace

json probe_sample(const ExperimentConfig& cfg, std::uint64_t sample_seed) {
    if (cfg.probe == "spectrum") return probe_spectrum(cfg, sample_seed);
    if (cfg.probe == "wegner") return probe_wegner(cfg, sample_seed);
    if (cfg.probe == "minami") return probe_minami(cfg, sample_seed);
    if (cfg.probe == "spacing_tail") return probe_spacing_tail(cfg, sample_seed);
    if (cfg.probe == "poisson") return probe_poisson(cfg, sample_seed);
    if (cfg.probe == "dos") return probe_dos(cfg, sample_seed);
    if (cfg.probe == "localization") return probe_localization(cfg, sample_seed);
    if (cfg.probe == "cluster_flatness") return probe_cluster_flatness(cfg, sample_seed);
    if (cfg.probe == "cartan") return probe_cartan(cfg, sample_seed);
    if (cfg.probe == "good_config") return probe_good_config(cfg, sample_seed);
    throw ConfigError("unknown probe: " + cfg.probe);
}

// --------------------------- aggregation -----------------------------------

namespace {

std::vector<const EnsembleRecord*> ok_records(const std::vector<EnsembleRecord>& records) {
    std::vector<const EnsembleRecord*> out;
    for (const auto& r : records)
        if (r.ok) out.push_back(&r);
    return out;
}

AggregateResult agg_frequency_grid(const ExperimentConfig& cfg, const std::vector<EnsembleRecord>& records) {
    auto ok = ok_records(records);
    AggregateResult a;
    a.probe = cfg.probe;
    a.n_records = static_cast<long>(ok.size());

    if (cfg.probe == "wegner") {
        const double E = cfg.probe_params.value("E", 1.0);
        std::vector<double> widths =
            cfg.probe_params.value("widths", std::vector<double>{0.16, 0.08, 0.04});
        std::vector<FrequencyRow> rows;
        json ratios = json::array();
        for (std::size_t w = 0; w < widths.size(); ++w) {
            long succ = 0;
            for (auto* r : ok)
                if (r->measurements["counts"][w].get<long>() >= 1) ++succ;
            WilsonInterval wi = wilson_interval(succ, static_cast<long>(ok.size()));
            rows.push_back({E, widths[w], wi.n, wi.p_hat, wi.lo, wi.hi});
            ratios.push_back(wi.p_hat / (volume(cfg.model) * widths[w]));
        }
        a.frequency_tables.emplace_back("wegner", rows);
        a.summary["normalized_ratio"] = ratios;  // p / (L^d |I|)
        return a;
    }

    if (cfg.probe == "minami") {
        const double E = cfg.probe_params.value("E", 1.0);
        std::vector<double> deltas = cfg.probe_params.value(
            "deltas", std::vector<double>{0.32, 0.16, 0.08, 0.04, 0.02, 0.01});
        std::vector<FrequencyRow> ge1, ge2;
        json ratios = json::array();
        for (std::size_t di = 0; di < deltas.size(); ++di) {
            long s1 = 0, s2 = 0;
            for (auto* r : ok) {
                long c = r->measurements["counts"][di].get<long>();
                if (c >= 1) ++s1;
                if (c >= 2) ++s2;
            }
            WilsonInterval w1 = wilson_interval(s1, static_cast<long>(ok.size()));
            WilsonInterval w2 = wilson_interval(s2, static_cast<long>(ok.size()));
            ge1.push_back({E, deltas[di], w1.n, w1.p_hat, w1.lo, w1.hi});
            ge2.push_back({E, deltas[di], w2.n, w2.p_hat, w2.lo, w2.hi});
            ratios.push_back(w2.p_hat / (std::pow(volume(cfg.model), 4) * deltas[di]));
        }
        a.frequency_tables.emplace_back("minami_ge1", ge1);
        a.frequency_tables.emplace_back("minami_ge2", ge2);
        a.summary["normalized_ratio"] = ratios;  // p / (L^{4d} delta)

        // cloned windows
        std::size_t K = ok.empty() ? 0 : ok.front()->measurements["clone_counts"].size();
        const double dclone =
            cfg.probe_params.value("clone_delta", *std::min_element(deltas.begin(), deltas.end()));
        std::vector<FrequencyRow> clone;
        for (std::size_t i = 0; i < K; ++i) {
            long s2 = 0;
            for (auto* r : ok)
                if (r->measurements["clone_counts"][i].get<long>() >= 2) ++s2;
            WilsonInterval w = wilson_interval(s2, static_cast<long>(ok.size()));
            clone.push_back({E + static_cast<double>(i) * 2.0 * dclone, dclone, w.n, w.p_hat, w.lo, w.hi});
        }
        if (!clone.empty()) a.frequency_tables.emplace_back("minami_clone", clone);
        return a;
    }

    // spacing_tail
    const double E = cfg.probe_params.value("E", cfg.model.thresholds().E_spc);
    std::vector<double> deltas = cfg.probe_params.value(
        "deltas", std::vector<double>{0.64, 0.32, 0.16, 0.08, 0.04, 0.02, 0.01, 0.005});
    std::sort(deltas.rbegin(), deltas.rend());
    std::vector<FrequencyRow> rows;
    long degenerate = 0;
    std::vector<double> finite_spacings;
    for (auto* r : ok) {
        if (r->measurements.value("degenerate", false)) ++degenerate;
        if (!r->measurements.value("spac_inf", false))
            finite_spacings.push_back(r->measurements["spac"].get<double>());
    }
    for (double dlt : deltas) {
        long succ = 0;
        for (auto* r : ok) {
            const bool inf = r->measurements.value("spac_inf", false);
            const double sp = inf ? kInf : r->measurements["spac"].get<double>();
            if (sp < dlt) ++succ;
        }
        WilsonInterval w = wilson_interval(succ, static_cast<long>(ok.size()));
        rows.push_back({E, dlt, w.n, w.p_hat, w.lo, w.hi});
    }
    a.frequency_tables.emplace_back("spacing_tail", rows);
    a.summary["degenerate_fraction"] =
        ok.empty() ? 0.0 : static_cast<double>(degenerate) / static_cast<double>(ok.size());
    a.summary["degenerate_count"] = degenerate;
    if (!finite_spacings.empty()) {
        const double mx = *std::max_element(finite_spacings.begin(), finite_spacings.end());
        a.histogram_tables.emplace_back("spacing_histogram",
                                        histogram(finite_spacings, 0.0, mx * 1.0000001, 40));
    }
    return a;
}

AggregateResult agg_poisson(const ExperimentConfig& cfg, const std::vector<EnsembleRecord>& records) {
    auto ok = ok_records(records);
    AggregateResult a;
    a.probe = cfg.probe;
    a.n_records = static_cast<long>(ok.size());
    std::vector<double> B = cfg.probe_params.value("B", std::vector<double>{-4.0, 4.0});
    const double blen = B[1] - B[0];
    std::vector<long> counts;
    std::vector<double> spacings;
    for (auto* r : ok) {
        counts.push_back(r->measurements["count"].get<long>());
        for (double s : r->measurements["spacings"].get<std::vector<double>>()) spacings.push_back(s);
    }
    std::sort(spacings.begin(), spacings.end());
    double total = 0.0;
    for (long c : counts) total += static_cast<double>(c);
    const double intensity = counts.empty() ? 0.0 : total / (static_cast<double>(counts.size()) * blen);
    a.summary["n_hat"] = intensity;  // unfolded intensity estimate at E
    if (intensity <= 0.0) {
        a.insufficient = true;
        return a;
    }
    PoissonTestReport rep = poisson_tests(counts, spacings, intensity, blen);
    a.insufficient = !rep.sufficient;
    a.summary["sufficient"] = rep.sufficient;
    if (rep.sufficient) {
        a.summary["ks_distance"] = rep.ks.distance;
        a.summary["ks_p"] = rep.ks.p_value;
        a.summary["ks_method"] = rep.ks.method;
        a.summary["chi2"] = rep.chi2.statistic;
        a.summary["chi2_p"] = rep.chi2.p_value;
        a.summary["chi2_dof"] = rep.chi2.dof;
        a.summary["chi2_method"] = rep.chi2.method;
    }
    if (!spacings.empty()) {
        const double mx = spacings.back();
        a.histogram_tables.emplace_back("unfolded_spacing_histogram",
                                        histogram(spacings, 0.0, mx * 1.0000001, 40));
    }
    std::vector<double> cd(counts.begin(), counts.end());
    if (!cd.empty())
        a.histogram_tables.emplace_back(
            "window_count_histogram",
            histogram(cd, 0.0, *std::max_element(cd.begin(), cd.end()) + 1.0,
                      static_cast<int>(*std::max_element(cd.begin(), cd.end())) + 1));
    return a;
}

AggregateResult agg_dos(const ExperimentConfig& cfg, const std::vector<EnsembleRecord>& records) {
    auto ok = ok_records(records);
    AggregateResult a;
    a.probe = cfg.probe;
    a.n_records = static_cast<long>(ok.size());
    const double e0 = cfg.probe_params.value("e_min", 0.0);
    const double e1 = cfg.probe_params.value("e_max", cfg.model.thresholds().E_spc);
    const long pts = cfg.probe_params.value("points", 33L);
    const double invvol = 1.0 / volume(cfg.model);
    std::vector<RunningStats> rs(static_cast<std::size_t>(pts));
    for (auto* r : ok) {
        const auto& c = r->measurements["counts"];
        for (long g = 0; g < pts; ++g) rs[g].add(invvol * c[g].get<double>());
    }
    IdsTable ids;
    ids.n_samples = ok.size();
    for (long g = 0; g < pts; ++g) {
        ids.energy.push_back(e0 + (e1 - e0) * static_cast<double>(g) / (pts - 1));
        ids.N.push_back(rs[g].mean());
        ids.N_stderr.push_back(rs[g].stderr_mean());
    }
    std::ostringstream ids_csv;
    ids_csv << "energy,N,stderr\n";
    char buf[160];
    for (std::size_t g = 0; g < ids.energy.size(); ++g) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", ids.energy[g], ids.N[g], ids.N_stderr[g]);
        ids_csv << buf;
    }
    a.extra_files.emplace_back("ids.csv", ids_csv.str());
    if (pts >= 3) {
        DosTable dos = dos_from_ids(ids);
        std::ostringstream dos_csv;
        dos_csv << "energy,n,stderr\n";
        for (std::size_t g = 0; g < dos.energy.size(); ++g) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", dos.energy[g], dos.n[g], dos.n_stderr[g]);
            dos_csv << buf;
        }
        a.extra_files.emplace_back("dos.csv", dos_csv.str());
    }
    a.summary["n_samples"] = static_cast<long>(ok.size());
    return a;
}

AggregateResult agg_localization(const ExperimentConfig& cfg, const std::vector<EnsembleRecord>& records) {
    auto ok = ok_records(records);
    AggregateResult a;
    a.probe = cfg.probe;
    a.n_records = static_cast<long>(ok.size());
    long total = 0, localized = 0, sufficient = 0;
    RunningStats mstats;
    for (auto* r : ok) {
        for (const auto& e : r->measurements["eigs"]) {
            ++total;
            if (!e.value("sufficient", false)) continue;
            ++sufficient;
            const double m = e["m_prime"].get<double>();
            const double r2 = e["r2"].get<double>();
            mstats.add(m);
            if (m > 0.0 && r2 > 0.9) ++localized;
        }
    }
    a.summary["n_eigenfunctions"] = total;
    a.summary["n_sufficient"] = sufficient;
    a.summary["localized_fraction"] =
        sufficient > 0 ? static_cast<double>(localized) / static_cast<double>(sufficient) : 0.0;
    a.summary["mean_m_prime"] = mstats.mean();
    a.insufficient = sufficient == 0;

    // optional resolvent-decay table alongside the eigenfunction diagnostics
    if (cfg.probe_params.contains("fractional")) {
        const json& f = cfg.probe_params["fractional"];
        const double E = f.value("E", -0.2);
        const double s = f.value("s", 0.5);
        const long n = f.value("n_samples", 500L);
        const long dmax = f.value("max_distance", 5L);
        std::vector<std::pair<GridIndex, GridIndex>> pairs;
        const int x0 = -static_cast<int>(cfg.model.L) / 4;
        for (long d = 0; d <= dmax; ++d)
            pairs.push_back({{x0, 0, 0}, {x0 + static_cast<int>(d), 0, 0}});
        FractionalMomentTable t =
            fractional_moment_probe(cfg.model, E, s, pairs, n, cfg.master_seed, cfg.workers);
        std::ostringstream csv;
        csv << "distance,mean,stderr,n,rejections\n";
        char buf[192];
        for (std::size_t i = 0; i < t.distance.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%ld,%ld\n", t.distance[i], t.mean[i],
                          t.se[i], t.n[i], t.rejections[i]);
            csv << buf;
        }
        a.extra_files.emplace_back("fm_decay.csv", csv.str());
        a.summary["fm_fitted_m"] = t.fitted_m;
        a.summary["fm_r_squared"] = t.r_squared;
        a.summary["fm_unreliable"] = t.unreliable;
    }
    return a;
}

AggregateResult agg_cluster_flatness(const ExperimentConfig& cfg,
                                     const std::vector<EnsembleRecord>& records) {
    auto ok = ok_records(records);
    AggregateResult a;
    a.probe = cfg.probe;
    a.n_records = static_cast<long>(ok.size());
    long clusters = 0, violations = 0, hypothesis_ok = 0;
    double worst_ratio = 0.0;
    for (auto* r : ok) {
        for (const auto& c : r->measurements["clusters"]) {
            ++clusters;
            if (c.value("hypothesis_ok", false)) {
                ++hypothesis_ok;
                if (c.value("violated", false)) ++violations;
                const double b = c["bound"].get<double>();
                if (b > 0.0) worst_ratio = std::max(worst_ratio, c["sup_norm"].get<double>() / b);
            }
        }
    }
    a.summary["clusters"] = clusters;
    a.summary["hypothesis_ok"] = hypothesis_ok;
    a.summary["violations"] = violations;
    a.summary["worst_ratio"] = worst_ratio;
    a.insufficient = clusters == 0;
    return a;
}

AggregateResult agg_cartan(const ExperimentConfig& cfg, const std::vector<EnsembleRecord>& records) {
    auto ok = ok_records(records);
    AggregateResult a;
    a.probe = cfg.probe;
    a.n_records = static_cast<long>(ok.size());
    RunningStats measure;
    long found = 0, conditioned = 0;
    for (auto* r : ok) {
        if (!r->measurements.value("found_cluster", false)) continue;
        ++found;
        measure.add(r->measurements["measure"].get<double>());
        if (r->measurements.value("conditioned", false)) ++conditioned;
    }
    a.summary["clusters_found"] = found;
    a.summary["conditioned"] = conditioned;
    a.summary["mean_measure"] = measure.mean();
    a.summary["measure_stderr"] = measure.stderr_mean();
    a.insufficient = found == 0;
    return a;
}

AggregateResult agg_good_config(const ExperimentConfig& cfg, const std::vector<EnsembleRecord>& records) {
    auto ok = ok_records(records);
    AggregateResult a;
    a.probe = cfg.probe;
    a.n_records = static_cast<long>(ok.size());
    long found = 0, success = 0, in_cube = 0;
    for (auto* r : ok) {
        if (!r->measurements.value("found_pair", false)) continue;
        ++found;
        const double seed_sp = r->measurements["seed_spacing"].get<double>();
        const double ach = r->measurements["achieved"].get<double>();
        const bool cube = r->measurements.value("in_cube", false);
        if (cube) ++in_cube;
        const bool improved = seed_sp > 0.0 ? ach >= 10.0 * seed_sp : ach > 0.0;
        if (cube && improved) ++success;
    }
    a.summary["instances"] = found;
    a.summary["in_cube"] = in_cube;
    a.summary["success"] = success;
    a.summary["success_rate"] =
        found > 0 ? static_cast<double>(success) / static_cast<double>(found) : 0.0;
    a.insufficient = found == 0;
    return a;
}

AggregateResult agg_spectrum(const ExperimentConfig& cfg, const std::vector<EnsembleRecord>& records) {
    auto ok = ok_records(records);
    AggregateResult a;
    a.probe = cfg.probe;
    a.n_records = static_cast<long>(ok.size());
    std::vector<double> all;
    RunningStats count_stats;
    for (auto* r : ok) {
        auto ev = r->measurements["eigenvalues"].get<std::vector<double>>();
        count_stats.add(static_cast<double>(ev.size()));
        all.insert(all.end(), ev.begin(), ev.end());
    }
    std::sort(all.begin(), all.end());
    a.summary["mean_count"] = count_stats.mean();
    if (!all.empty()) {
        a.summary["min_eigenvalue"] = all.front();
        a.summary["max_eigenvalue"] = all.back();
        a.histogram_tables.emplace_back("eigenvalue_histogram",
                                        histogram(all, all.front(), all.back() * 1.0000001 + 1e-12, 50));
    }
    return a;
}

}  // namespace

AggregateResult probe_aggregate(const ExperimentConfig& cfg, const std::vector<EnsembleRecord>& records) {
    if (cfg.probe == "wegner" || cfg.probe == "minami" || cfg.probe == "spacing_tail")
        return agg_frequency_grid(cfg, records);
    if (cfg.probe == "poisson") return agg_poisson(cfg, records);
    if (cfg.probe == "dos") return agg_dos(cfg, records);
    if (cfg.probe == "localization") return agg_localization(cfg, records);
    if (cfg.probe == "cluster_flatness") return agg_cluster_flatness(cfg, records);
    if (cfg.probe == "cartan") return agg_cartan(cfg, records);
    if (cfg.probe == "good_config") return agg_good_config(cfg, records);
    return agg_spectrum(cfg, records);
}

}  // namespace rsl
