#pragma once

#include <Eigen/Dense>
#include <random>

#include "rsl/common.hpp"
#include "rsl/discretize.hpp"

namespace testsup {

inline double u01(std::mt19937_64& eng) { return rsl::u01(eng); }

inline double gauss(std::mt19937_64& eng) {
    // Box-Muller, engine-stable across platforms
    double u1 = std::max(rsl::u01(eng), 1e-300);
    double u2 = rsl::u01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline Eigen::MatrixXd random_symmetric(long n, std::mt19937_64& eng, double scale = 1.0) {
    Eigen::MatrixXd M(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j <= i; ++j) M(i, j) = M(j, i) = scale * gauss(eng);
    return M;
}

inline Eigen::MatrixXd haar_orthogonal(long n, std::mt19937_64& eng) {
    Eigen::MatrixXd G(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) G(i, j) = gauss(eng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ();
    Eigen::VectorXd d = qr.matrixQR().diagonal();
    for (long i = 0; i < n; ++i)
        if (d[i] < 0) Q.col(i) = -Q.col(i);
    return Q;
}

/// Symmetric matrix with a prescribed spectrum in a random frame.
inline Eigen::MatrixXd with_spectrum(const Eigen::VectorXd& eigs, std::mt19937_64& eng) {
    Eigen::MatrixXd Q = haar_orthogonal(eigs.size(), eng);
    return Q * eigs.asDiagonal() * Q.transpose();
}

/// 0 <= B <= 1 in a random frame.
inline Eigen::MatrixXd random_contraction_psd(long n, std::mt19937_64& eng) {
    Eigen::VectorXd d(n);
    for (long i = 0; i < n; ++i) d[i] = rsl::u01(eng);
    return with_spectrum(d, eng);
}

/// Sparse operator wrapper around a dense symmetric matrix (test helper).
inline rsl::SparseSymOperator to_sparse(const Eigen::MatrixXd& M) {
    rsl::SymTripletBuilder b(M.rows());
    for (long i = 0; i < M.rows(); ++i) {
        b.add_diag(i, M(i, i));
        for (long j = i + 1; j < M.cols(); ++j)
            if (M(i, j) != 0.0) b.add_offdiag(i, j, M(i, j));
    }
    rsl::SparseSymOperator A = b.build();
    A.d = 1;
    A.h = 1.0;
    A.node.resize(M.rows());
    for (long i = 0; i < M.rows(); ++i) A.node[i] = {static_cast<double>(i), 0.0, 0.0};
    return A;
}

inline rsl::SparseSymOperator diag_operator(const std::vector<double>& d) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<long>(d.size()), static_cast<long>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) M(i, i) = d[i];
    return to_sparse(M);
}

}  // namespace testsup
