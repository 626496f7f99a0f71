#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rsl/common.hpp"
#include "rsl/discretize.hpp"
#include "rsl/model.hpp"
#include "rsl/stats.hpp"

namespace rsl {

/// Per-unit-cell mass profile of a normalized eigenfunction. The cell of a
/// node u is the integer point y with u in y + [-1/2, 1/2)^d.
struct EigenfunctionProfile {
    int d = 1;
    std::vector<GridIndex> cells;  // occupied cells, lexicographic
    std::vector<double> mass;      // ||chi_y psi|| per cell
    double eigenvalue = 0.0;
};

EigenfunctionProfile local_norms(const Eigen::VectorXd& psi, const SparseSymOperator& A);

/// Cell of maximal mass; ties go to the lexicographically smallest cell.
GridIndex localization_center(const EigenfunctionProfile& profile, bool* tie = nullptr);

struct DecayFit {
    double m_prime = 0.0;
    double r_squared = 0.0;
    std::size_t cells_used = 0;
    bool sufficient = false;  // at least 4 cells above the mass floor
};

inline constexpr double kMassFloor = 1e-14;

/// Least-squares fit of log mass(y) against -|y - center| (sup distance).
DecayFit decay_rate_fit(const EigenfunctionProfile& profile);

/// ||chi_x (A - E)^{-1} chi_y||^s for unit cells x, y; throws SolverError
/// when E is within tolerance of the spectrum.
double fractional_moment_sample(const SparseSymOperator& A, double E, double s, const GridIndex& x,
                                const GridIndex& y);

struct FractionalMomentTable {
    std::vector<double> distance;
    std::vector<double> mean;
    std::vector<double> se;
    std::vector<long> n;
    std::vector<long> rejections;
    double fitted_m = 0.0;
    double fitted_C = 0.0;
    double r_squared = 0.0;
    long total_rejections = 0;
    bool unreliable = false;  // rejection rate above 50%
    double s = 0.5;
    double E = 0.0;
};

/// Ensemble mean of ||chi_x R_E chi_y||^s per pair, merged by |x - y| and
/// fitted log-linearly in the distance. Near-singular samples are resampled
/// and counted as rejections.
FractionalMomentTable fractional_moment_probe(const ModelParams& params, double E, double s,
                                              const std::vector<std::pair<GridIndex, GridIndex>>& pairs,
                                              long n_samples, std::uint64_t seed, int workers = 1);

void write_decay_csv(const std::string& path, const FractionalMomentTable& table);

}  // namespace rsl
