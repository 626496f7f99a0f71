#include "rsl/ldlt.hpp"

#include <cmath>

namespace rsl {

namespace {
constexpr double kAlpha = 0.6403882032022076;  // (1 + sqrt(17)) / 8
}

BunchKaufmanLDLT::BunchKaufmanLDLT(Eigen::MatrixXd A) : a_(std::move(A)) {
    const long n = a_.rows();
    if (a_.cols() != n) throw PreconditionError("ldlt: matrix must be square");
    ipiv_.assign(static_cast<std::size_t>(n), 0);
    scale_ = n > 0 ? a_.cwiseAbs().maxCoeff() : 0.0;

    long k = 0;
    while (k < n) {
        int kstep = 1;
        long kp = k;
        const double absakk = std::abs(a_(k, k));
        long imax = k;
        double colmax = 0.0;
        if (k < n - 1) {
            for (long i = k + 1; i < n; ++i) {
                double v = std::abs(a_(i, k));
                if (v > colmax) {
                    colmax = v;
                    imax = i;
                }
            }
        }
        if (std::max(absakk, colmax) == 0.0) {
            kp = k;  // exactly singular pivot; keep the zero on D
        } else {
            if (absakk >= kAlpha * colmax) {
                kp = k;
            } else {
                double rowmax = 0.0;
                for (long j = k; j < imax; ++j) rowmax = std::max(rowmax, std::abs(a_(imax, j)));
                for (long j = imax + 1; j < n; ++j) rowmax = std::max(rowmax, std::abs(a_(j, imax)));
                if (absakk >= kAlpha * colmax * (colmax / rowmax)) {
                    kp = k;
                } else if (std::abs(a_(imax, imax)) >= kAlpha * rowmax) {
                    kp = imax;
                } else {
                    kp = imax;
                    kstep = 2;
                }
            }
            const long kk = k + kstep - 1;
            if (kp != kk) {
                // symmetric interchange of rows/columns kk and kp (lower part)
                for (long i = kp + 1; i < n; ++i) std::swap(a_(i, kk), a_(i, kp));
                for (long j = kk + 1; j < kp; ++j) std::swap(a_(j, kk), a_(kp, j));
                std::swap(a_(kk, kk), a_(kp, kp));
                if (kstep == 2) std::swap(a_(k + 1, k), a_(kp, k));
            }
            if (kstep == 1) {
                if (k < n - 1) {
                    const double d11 = 1.0 / a_(k, k);
                    for (long j = k + 1; j < n; ++j) {
                        const double wj = d11 * a_(j, k);
                        for (long i = j; i < n; ++i) a_(i, j) -= a_(i, k) * wj;
                    }
                    for (long i = k + 1; i < n; ++i) a_(i, k) *= d11;
                }
            } else {
                if (k < n - 2) {
                    double d21 = a_(k + 1, k);
                    const double d11 = a_(k + 1, k + 1) / d21;
                    const double d22 = a_(k, k) / d21;
                    const double t = 1.0 / (d11 * d22 - 1.0);
                    d21 = t / d21;
                    for (long j = k + 2; j < n; ++j) {
                        const double wk = d21 * (d11 * a_(j, k) - a_(j, k + 1));
                        const double wkp1 = d21 * (d22 * a_(j, k + 1) - a_(j, k));
                        for (long i = j; i < n; ++i) a_(i, j) -= a_(i, k) * wk + a_(i, k + 1) * wkp1;
                        a_(j, k) = wk;
                        a_(j, k + 1) = wkp1;
                    }
                }
            }
        }
        if (kstep == 1) {
            ipiv_[k] = static_cast<int>(kp + 1);
        } else {
            ipiv_[k] = -static_cast<int>(kp + 1);
            ipiv_[k + 1] = -static_cast<int>(kp + 1);
        }
        k += kstep;
    }
}

Inertia BunchKaufmanLDLT::inertia(double zero_tol) const {
    Inertia in;
    const long n = dim();
    long k = 0;
    while (k < n) {
        if (ipiv_[k] > 0) {
            const double d = a_(k, k);
            if (std::abs(d) <= zero_tol)
                ++in.n_zero;
            else if (d > 0.0)
                ++in.n_pos;
            else
                ++in.n_neg;
            ++k;
        } else {
            const double a = a_(k, k), b = a_(k + 1, k), c = a_(k + 1, k + 1);
            const double mean = 0.5 * (a + c);
            const double rad = std::hypot(0.5 * (a - c), b);
            for (double lam : {mean + rad, mean - rad}) {
                if (std::abs(lam) <= zero_tol)
                    ++in.n_zero;
                else if (lam > 0.0)
                    ++in.n_pos;
                else
                    ++in.n_neg;
            }
            k += 2;
        }
    }
    return in;
}

double BunchKaufmanLDLT::min_block_eig() const {
    const long n = dim();
    double m = kInf;
    long k = 0;
    while (k < n) {
        if (ipiv_[k] > 0) {
            m = std::min(m, std::abs(a_(k, k)));
            ++k;
        } else {
            const double a = a_(k, k), b = a_(k + 1, k), c = a_(k + 1, k + 1);
            const double mean = 0.5 * (a + c);
            const double rad = std::hypot(0.5 * (a - c), b);
            m = std::min({m, std::abs(mean + rad), std::abs(mean - rad)});
            k += 2;
        }
    }
    return m;
}

void BunchKaufmanLDLT::solve_in_place(Eigen::Ref<Eigen::MatrixXd> B) const {
    const long n = dim();
    if (B.rows() != n) throw PreconditionError("ldlt solve: dimension mismatch");
    // L D y = P b
    long k = 0;
    while (k < n) {
        if (ipiv_[k] > 0) {
            const long kp = ipiv_[k] - 1;
            if (kp != k) B.row(k).swap(B.row(kp));
            if (k < n - 1) B.bottomRows(n - k - 1).noalias() -= a_.col(k).segment(k + 1, n - k - 1) * B.row(k);
            const double d = a_(k, k);
            if (d == 0.0) throw SolverError("ldlt solve: exactly singular pivot");
            B.row(k) /= d;
            ++k;
        } else {
            const long kp = -ipiv_[k] - 1;
            if (kp != k + 1) B.row(k + 1).swap(B.row(kp));
            if (k < n - 2) {
                B.bottomRows(n - k - 2).noalias() -= a_.col(k).segment(k + 2, n - k - 2) * B.row(k);
                B.bottomRows(n - k - 2).noalias() -= a_.col(k + 1).segment(k + 2, n - k - 2) * B.row(k + 1);
            }
            const double akm1k = a_(k + 1, k);
            const double akm1 = a_(k, k) / akm1k;
            const double ak = a_(k + 1, k + 1) / akm1k;
            const double denom = akm1 * ak - 1.0;
            for (long j = 0; j < B.cols(); ++j) {
                const double bkm1 = B(k, j) / akm1k;
                const double bk = B(k + 1, j) / akm1k;
                B(k, j) = (ak * bkm1 - bk) / denom;
                B(k + 1, j) = (akm1 * bk - bkm1) / denom;
            }
            k += 2;
        }
    }
    // L^T x = y
    k = n - 1;
    while (k >= 0) {
        if (ipiv_[k] > 0) {
            if (k < n - 1)
                B.row(k).noalias() -= a_.col(k).segment(k + 1, n - k - 1).transpose() * B.bottomRows(n - k - 1);
            const long kp = ipiv_[k] - 1;
            if (kp != k) B.row(k).swap(B.row(kp));
            --k;
        } else {
            if (k < n - 1) {
                B.row(k).noalias() -= a_.col(k).segment(k + 1, n - k - 1).transpose() * B.bottomRows(n - k - 1);
                B.row(k - 1).noalias() -= a_.col(k - 1).segment(k + 1, n - k - 1).transpose() * B.bottomRows(n - k - 1);
            }
            const long kp = -ipiv_[k] - 1;
            if (kp != k) B.row(k).swap(B.row(kp));
            k -= 2;
        }
    }
}

Eigen::VectorXd BunchKaufmanLDLT::solve(const Eigen::VectorXd& b) const {
    Eigen::MatrixXd B = b;
    solve_in_place(B);
    return B.col(0);
}

Eigen::MatrixXd BunchKaufmanLDLT::solve(const Eigen::MatrixXd& B) const {
    Eigen::MatrixXd X = B;
    solve_in_place(X);
    return X;
}

Inertia tridiag_inertia(const std::vector<double>& diag, const std::vector<double>& off, double shift,
                        double zero_tol) {
    Inertia in;
    const std::size_t n = diag.size();
    double prev = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = diag[i] - shift;
        if (i > 0) d -= off[i - 1] * off[i - 1] / prev;
        if (std::abs(d) <= zero_tol) {
            ++in.n_zero;
            prev = d < 0.0 ? -zero_tol : zero_tol;
            if (prev == 0.0) prev = zero_tol;
        } else {
            if (d > 0.0)
                ++in.n_pos;
            else
                ++in.n_neg;
            prev = d;
        }
    }
    return in;
}

}  // namespace rsl
