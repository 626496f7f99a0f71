#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rsl/common.hpp"

namespace rsl {

struct Inertia {
    long n_neg = 0;
    long n_zero = 0;
    long n_pos = 0;
    long total() const { return n_neg + n_zero + n_pos; }
};

/// Symmetric indefinite factorization P A P^T = L D L^T with Bunch-Kaufman
/// 1x1 / 2x2 pivoting (unblocked, lower triangle). Gives the inertia of A by
/// Sylvester's law and solves linear systems for shift-invert work.
class BunchKaufmanLDLT {
  public:
    explicit BunchKaufmanLDLT(Eigen::MatrixXd A);

    long dim() const { return static_cast<long>(a_.rows()); }
    double scale() const { return scale_; }  // max |A_ij| of the input

    /// Pivot-block eigenvalues within zero_tol of 0 count as zero.
    Inertia inertia(double zero_tol) const;

    /// Smallest |eigenvalue| over the diagonal blocks of D.
    double min_block_eig() const;

    void solve_in_place(Eigen::Ref<Eigen::MatrixXd> B) const;
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;

  private:
    Eigen::MatrixXd a_;
    std::vector<int> ipiv_;  // LAPACK convention, 1-based; negative marks 2x2
    double scale_ = 0.0;
};

struct SparseSymOperator;  // discretize.hpp

/// Sturm-sequence inertia of (T - shift) for tridiagonal T; O(n).
Inertia tridiag_inertia(const std::vector<double>& diag, const std::vector<double>& off, double shift,
                        double zero_tol);

}  // namespace rsl
