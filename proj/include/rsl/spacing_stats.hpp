#pragma once

#include <string>
#include <vector>

#include "rsl/common.hpp"
#include "rsl/spectral.hpp"
#include "rsl/stats.hpp"

namespace rsl {

/// Minimal pairwise gap among eigenvalues in I, counting multiplicity.
/// Returns +inf when fewer than two eigenvalues lie in I.
double spacing(const Spectrum& spec, Interval I);
double spacing(const std::vector<double>& sorted_eigenvalues, Interval I);

/// spac_E = spac_{(-inf, E]}.
double spacing_below(const Spectrum& spec, double E);

/// Squared Vandermonde product over the eigenvalues in I; needs n >= 2.
double discriminant(const Spectrum& spec, Interval I);
double discriminant(const std::vector<double>& sorted_eigenvalues, Interval I);

struct ClusterDecomposition {
    struct Cluster {
        std::size_t begin = 0, end = 0;  // index range into the eigenvalue list
        Interval enclosing;              // [min eigenvalue, max eigenvalue]
        double gap_below = kInf;
        double gap_above = kInf;
    };
    std::vector<Cluster> clusters;
    double epsilon = 0.0;
};

/// Greedy gap clustering below E_max: split whenever a consecutive gap
/// exceeds 6 epsilon.
ClusterDecomposition find_clusters(const Spectrum& spec, double epsilon, double E_max);

/// Multiplicity-weighted arithmetic mean of a cluster.
double central_energy(const Spectrum& spec, const ClusterDecomposition::Cluster& cluster);

/// Number of eigenvalues in the unfolded window E + L^{-d} B.
long unfolded_counts(const Spectrum& spec, double E, double L, int d, Interval B);

struct IdsTable {
    std::vector<double> energy;
    std::vector<double> N;        // ensemble mean of L^{-d} count(<= E)
    std::vector<double> N_stderr;
    std::size_t n_samples = 0;
};

struct DosTable {
    std::vector<double> energy;   // interior grid points
    std::vector<double> n;        // central differences of N
    std::vector<double> n_stderr;
};

IdsTable ids_table(const std::vector<Spectrum>& ensemble, double L, int d, const std::vector<double>& grid);
DosTable dos_from_ids(const IdsTable& ids);

struct PoissonTestReport {
    bool sufficient = false;
    KsResult ks;       // unfolded spacings vs Exponential(intensity)
    Chi2Result chi2;   // window counts vs Poisson(intensity * |B|)
    double intensity = 0.0;
    double window_length = 0.0;
};

/// Requires at least 30 count and 30 spacing samples.
PoissonTestReport poisson_tests(const std::vector<long>& counts, const std::vector<double>& spacings,
                                double intensity, double window_length);

// CSV export ---------------------------------------------------------------

struct FrequencyRow {
    double energy = 0.0;
    double delta = 0.0;
    long n_samples = 0;
    double frequency = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct HistogramRow {
    double bin_left = 0.0;
    double bin_right = 0.0;
    long count = 0;
};

void write_frequency_csv(const std::string& path, const std::vector<FrequencyRow>& rows);
void write_histogram_csv(const std::string& path, const std::vector<HistogramRow>& rows);
std::vector<HistogramRow> histogram(const std::vector<double>& samples, double lo, double hi, int bins);

}  // namespace rsl
