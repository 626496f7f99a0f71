#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "rsl/common.hpp"
#include "rsl/discretize.hpp"
#include "rsl/ldlt.hpp"

namespace rsl {

/// Relative tolerance under which eigenvalues are grouped into one
/// multiplicity class.
inline constexpr double kDegeneracyTol = 1e-9;

/// Relative zero-pivot tolerance for inertia classification.
inline constexpr double kZeroPivotRel = 1e-12;

struct Spectrum {
    std::vector<double> eigenvalues;  // ascending, counted with multiplicity
    Eigen::MatrixXd vectors;          // columns aligned with eigenvalues when requested
    double cutoff = kInf;
    double tol = 1e-9;
    bool has_vectors = false;

    long count_in(const Interval& I) const;
    /// (representative value, multiplicity) with grouping at reltol*max(1,|v|).
    std::vector<std::pair<double, long>> multiplicity_groups(double reltol = kDegeneracyTol) const;
};

struct CountResult {
    long count = 0;
    bool at_boundary = false;  // an endpoint hit a pivot within tolerance
};

struct EigsOptions {
    bool want_vectors = false;
    long dense_crossover = 1024;
    bool force_iterative = false;  // exercised by tests
    double residual_tol = 1e-9;    // relative to max |A_ij|
    long max_slice = 32;           // eigenvalues per shift-invert slice
    long restart_budget = 8;
};

struct EigsError : SolverError {
    Spectrum partial;
    EigsError(const std::string& what, Spectrum p) : SolverError(what), partial(std::move(p)) {}
};

/// Inertia of A - shift. Uses the Sturm recurrence when A is tridiagonal,
/// Bunch-Kaufman otherwise.
Inertia inertia_at(const SparseSymOperator& A, double shift, double zero_tol);

/// Number of eigenvalues in the closed interval I, by Sylvester's law:
/// (n_neg + n_zero at hi) - (n_neg at lo). On a boundary hit the count is
/// recomputed with the offending endpoints nudged outward and flagged.
CountResult count_interval(const SparseSymOperator& A, Interval I);
CountResult count_interval(const Eigen::MatrixXd& A, Interval I);

/// All eigenvalues <= E, complete against count_interval. Dense solver up to
/// dense_crossover, slicing shift-invert Lanczos with full
/// reorthogonalization above.
Spectrum eigs_below(const SparseSymOperator& A, double E, const EigsOptions& opt = {});

/// Orthonormal basis of ran 1_I(A); rank equals count_interval(A, I).
Eigen::MatrixXd spectral_projection(const Eigen::MatrixXd& A, Interval I);
Eigen::MatrixXd spectral_projection(const SparseSymOperator& A, Interval I);

struct ShiftResult {
    long xi = 0;
    bool at_boundary = false;
};

/// xi(E) = count(A0, (-inf,E]) - count(A1, (-inf,E]).
ShiftResult spectral_shift(const SparseSymOperator& A0, const SparseSymOperator& A1, double E);
ShiftResult spectral_shift(const Eigen::MatrixXd& A0, const Eigen::MatrixXd& A1, double E);

/// Operator norm of the X-rows / Y-columns block of (A - E)^{-1}.
double resolvent_block_norm(const SparseSymOperator& A, double E, const std::vector<long>& X,
                            const std::vector<long>& Y);

}  // namespace rsl
