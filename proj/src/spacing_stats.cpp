#include "rsl/spacing_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace rsl {

double spacing(const std::vector<double>& ev, Interval I) {
    auto lo = std::lower_bound(ev.begin(), ev.end(), I.lo);
    auto hi = std::upper_bound(ev.begin(), ev.end(), I.hi);
    if (hi - lo < 2) return kInf;
    double best = kInf;
    for (auto it = lo; it + 1 != hi; ++it) best = std::min(best, *(it + 1) - *it);
    return best;
}

double spacing(const Spectrum& spec, Interval I) { return spacing(spec.eigenvalues, I); }

double spacing_below(const Spectrum& spec, double E) { return spacing(spec.eigenvalues, Interval::below(E)); }

double discriminant(const std::vector<double>& ev, Interval I) {
    auto lo = std::lower_bound(ev.begin(), ev.end(), I.lo);
    auto hi = std::upper_bound(ev.begin(), ev.end(), I.hi);
    const long n = hi - lo;
    if (n < 2) throw PreconditionError("discriminant: need at least two eigenvalues in the interval");
    long double prod = 1.0L;
    for (auto a = lo; a != hi; ++a)
        for (auto b = a + 1; b != hi; ++b) {
            const long double d = static_cast<long double>(*a) - static_cast<long double>(*b);
            prod *= d * d;
        }
    return static_cast<double>(prod);
}

double discriminant(const Spectrum& spec, Interval I) { return discriminant(spec.eigenvalues, I); }

ClusterDecomposition find_clusters(const Spectrum& spec, double epsilon, double E_max) {
    if (!(epsilon > 0.0)) throw PreconditionError("find_clusters: epsilon must be positive");
    ClusterDecomposition dec;
    dec.epsilon = epsilon;
    const auto& ev = spec.eigenvalues;
    const std::size_t m = std::upper_bound(ev.begin(), ev.end(), E_max) - ev.begin();
    if (m == 0) return dec;
    const double split = 6.0 * epsilon;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= m; ++i) {
        if (i == m || ev[i] - ev[i - 1] > split) {
            ClusterDecomposition::Cluster c;
            c.begin = start;
            c.end = i;
            c.enclosing = {ev[start], ev[i - 1]};
            c.gap_below = start > 0 ? ev[start] - ev[start - 1] : kInf;
            c.gap_above = i < ev.size() ? ev[i] - ev[i - 1] : kInf;
            dec.clusters.push_back(c);
            start = i;
        }
    }
    return dec;
}

double central_energy(const Spectrum& spec, const ClusterDecomposition::Cluster& cluster) {
    if (cluster.end <= cluster.begin) throw PreconditionError("central_energy: empty cluster");
    double s = 0.0;
    for (std::size_t i = cluster.begin; i < cluster.end; ++i) s += spec.eigenvalues[i];
    return s / static_cast<double>(cluster.end - cluster.begin);
}

long unfolded_counts(const Spectrum& spec, double E, double L, int d, Interval B) {
    if (B.empty()) return 0;
    if (!std::isfinite(B.lo) || !std::isfinite(B.hi))
        throw PreconditionError("unfolded_counts: B must be bounded");
    const double scale = std::pow(L, -d);
    Interval window{E + scale * B.lo, E + scale * B.hi};
    const auto& ev = spec.eigenvalues;
    return std::upper_bound(ev.begin(), ev.end(), window.hi) - std::lower_bound(ev.begin(), ev.end(), window.lo);
}

IdsTable ids_table(const std::vector<Spectrum>& ensemble, double L, int d, const std::vector<double>& grid) {
    if (ensemble.empty()) throw PreconditionError("ids_table: need at least one spectrum");
    IdsTable t;
    t.energy = grid;
    t.n_samples = ensemble.size();
    const double invvol = std::pow(L, -d);
    t.N.resize(grid.size());
    t.N_stderr.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        RunningStats rs;
        for (const auto& s : ensemble) {
            const auto& ev = s.eigenvalues;
            long c = std::upper_bound(ev.begin(), ev.end(), grid[g]) - ev.begin();
            rs.add(invvol * static_cast<double>(c));
        }
        t.N[g] = rs.mean();
        t.N_stderr[g] = rs.stderr_mean();
    }
    return t;
}

DosTable dos_from_ids(const IdsTable& ids) {
    if (ids.energy.size() < 3) throw PreconditionError("dos_from_ids: need at least three grid points");
    DosTable d;
    for (std::size_t g = 1; g + 1 < ids.energy.size(); ++g) {
        const double dx = ids.energy[g + 1] - ids.energy[g - 1];
        d.energy.push_back(ids.energy[g]);
        d.n.push_back((ids.N[g + 1] - ids.N[g - 1]) / dx);
        d.n_stderr.push_back(std::hypot(ids.N_stderr[g + 1], ids.N_stderr[g - 1]) / dx);
    }
    return d;
}

PoissonTestReport poisson_tests(const std::vector<long>& counts, const std::vector<double>& spacings,
                                double intensity, double window_length) {
    if (!(intensity > 0.0)) throw PreconditionError("poisson_tests: intensity must be positive");
    PoissonTestReport rep;
    rep.intensity = intensity;
    rep.window_length = window_length;
    if (counts.size() < 30 || spacings.size() < 30) {
        rep.sufficient = false;
        return rep;
    }
    rep.sufficient = true;
    rep.ks = ks_test_exponential(spacings, intensity);
    rep.chi2 = chi2_poisson_test(counts, intensity * window_length);
    return rep;
}

// ---------------------------------------------------------------------------

void write_frequency_csv(const std::string& path, const std::vector<FrequencyRow>& rows) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    os << "energy,delta,n_samples,frequency,ci_low,ci_high\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%ld,%.17g,%.17g,%.17g\n", r.energy, r.delta, r.n_samples,
                      r.frequency, r.ci_low, r.ci_high);
        os << buf;
    }
}

void write_histogram_csv(const std::string& path, const std::vector<HistogramRow>& rows) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    os << "bin_left,bin_right,count\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%ld\n", r.bin_left, r.bin_right, r.count);
        os << buf;
    }
}

std::vector<HistogramRow> histogram(const std::vector<double>& samples, double lo, double hi, int bins) {
    std::vector<HistogramRow> rows(static_cast<std::size_t>(bins));
    const double w = (hi - lo) / bins;
    for (int b = 0; b < bins; ++b) {
        rows[b].bin_left = lo + b * w;
        rows[b].bin_right = lo + (b + 1) * w;
    }
    for (double s : samples) {
        if (s < lo || s >= hi) continue;
        int b = std::min(bins - 1, static_cast<int>((s - lo) / w));
        ++rows[b].count;
    }
    return rows;
}

}  // namespace rsl
