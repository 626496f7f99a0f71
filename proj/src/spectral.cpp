#include "rsl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rsl {

namespace {

double matrix_scale(const SparseSymOperator& A) { return std::max(A.max_abs(), 1e-300); }

double zero_tol_for(double scale) { return kZeroPivotRel * std::max(scale, 1.0); }

struct EndpointCount {
    long below_or_at = 0;  // n_neg + n_zero
    long below = 0;        // n_neg
    bool boundary = false;
};

template <class InertiaFn>
EndpointCount endpoint_count(const InertiaFn& inertia_of, double shift) {
    Inertia in = inertia_of(shift);
    return {in.n_neg + in.n_zero, in.n_neg, in.n_zero > 0};
}

template <class InertiaFn>
CountResult count_interval_impl(const InertiaFn& inertia_of, long n, Interval I, double zero_tol) {
    CountResult r;
    if (I.empty()) return r;
    const double eta = 8.0 * zero_tol;
    long hi_count = n;
    long lo_count = 0;
    if (std::isfinite(I.hi)) {
        EndpointCount e = endpoint_count(inertia_of, I.hi);
        if (e.boundary) {
            r.at_boundary = true;
            e = endpoint_count(inertia_of, I.hi + eta);
        }
        hi_count = e.below_or_at;
    }
    if (std::isfinite(I.lo)) {
        EndpointCount e = endpoint_count(inertia_of, I.lo);
        if (e.boundary) {
            r.at_boundary = true;
            e = endpoint_count(inertia_of, I.lo - eta);
        }
        lo_count = e.below;
    }
    r.count = hi_count - lo_count;
    return r;
}

std::vector<double> tridiag_main(const SparseSymOperator& A) {
    std::vector<double> d(A.n);
    for (long i = 0; i < A.n; ++i) {
        d[i] = 0.0;
        for (long p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p)
            if (A.col[p] == i) d[i] = A.val[p];
    }
    return d;
}

std::vector<double> tridiag_off(const SparseSymOperator& A) {
    std::vector<double> e(A.n > 0 ? A.n - 1 : 0, 0.0);
    for (long i = 0; i + 1 < A.n; ++i)
        for (long p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p)
            if (A.col[p] == i + 1) e[i] = A.val[p];
    return e;
}

}  // namespace

long Spectrum::count_in(const Interval& I) const {
    long c = 0;
    for (double v : eigenvalues)
        if (I.contains(v)) ++c;
    return c;
}

std::vector<std::pair<double, long>> Spectrum::multiplicity_groups(double reltol) const {
    std::vector<std::pair<double, long>> g;
    for (double v : eigenvalues) {
        if (!g.empty() && std::abs(v - g.back().first) <= reltol * std::max(1.0, std::abs(v))) {
            ++g.back().second;
        } else {
            g.emplace_back(v, 1);
        }
    }
    return g;
}

Inertia inertia_at(const SparseSymOperator& A, double shift, double zero_tol) {
    if (A.is_tridiagonal()) {
        return tridiag_inertia(tridiag_main(A), tridiag_off(A), shift, zero_tol);
    }
    Eigen::MatrixXd M = A.to_dense();
    M.diagonal().array() -= shift;
    return BunchKaufmanLDLT(std::move(M)).inertia(zero_tol);
}

CountResult count_interval(const SparseSymOperator& A, Interval I) {
    const double ztol = zero_tol_for(matrix_scale(A));
    auto fn = [&](double s) { return inertia_at(A, s, ztol); };
    return count_interval_impl(fn, A.n, I, ztol);
}

CountResult count_interval(const Eigen::MatrixXd& A, Interval I) {
    const double scale = std::max(A.size() ? A.cwiseAbs().maxCoeff() : 0.0, 1e-300);
    const double ztol = zero_tol_for(scale);
    auto fn = [&](double s) {
        Eigen::MatrixXd M = A;
        M.diagonal().array() -= s;
        return BunchKaufmanLDLT(std::move(M)).inertia(ztol);
    };
    return count_interval_impl(fn, A.rows(), I, ztol);
}

// ---------------------------------------------------------------------------
// eigs_below

namespace {

Spectrum dense_eigs_below(const SparseSymOperator& A, double E, const EigsOptions& opt, long want) {
    Eigen::MatrixXd D = A.to_dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D, opt.want_vectors ? Eigen::ComputeEigenvectors
                                                                          : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw EigsError("dense eigensolver failed", Spectrum{});
    Spectrum s;
    s.cutoff = E;
    s.tol = opt.residual_tol;
    s.has_vectors = opt.want_vectors;
    s.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + want);
    if (opt.want_vectors) s.vectors = es.eigenvectors().leftCols(want);
    return s;
}

struct SliceJob {
    double lo, hi;
    long want;
};

// Shift-invert Lanczos with full reorthogonalization on one spectral slice.
// Converged vectors accumulate in `vecs`; restarts deflate against them.
void solve_slice(const SparseSymOperator& A, const SliceJob& job, const EigsOptions& opt, double scale,
                 std::vector<double>& vals, std::vector<Eigen::VectorXd>& vecs, std::uint64_t seed) {
    const long n = A.n;
    const double ztol = zero_tol_for(scale);
    double sigma = 0.5 * (job.lo + job.hi);
    Eigen::MatrixXd M = A.to_dense();
    M.diagonal().array() -= sigma;
    BunchKaufmanLDLT fac(std::move(M));
    if (fac.min_block_eig() <= 16.0 * ztol) {
        sigma += 64.0 * ztol;
        Eigen::MatrixXd M2 = A.to_dense();
        M2.diagonal().array() -= sigma;
        fac = BunchKaufmanLDLT(std::move(M2));
    }

    std::mt19937_64 eng(splitmix64(seed));
    const double res_tol = opt.residual_tol * std::max(scale, 1.0);
    long found = 0;
    std::vector<Eigen::VectorXd> conv;  // this slice's eigenvectors

    auto deflate = [&](Eigen::VectorXd& w) {
        for (const auto& q : conv) w -= q.dot(w) * q;
        for (const auto& q : vecs) w -= q.dot(w) * q;
    };

    for (long restart = 0; restart <= opt.restart_budget && found < job.want; ++restart) {
        Eigen::VectorXd v(n);
        for (long i = 0; i < n; ++i) v[i] = 2.0 * u01(eng) - 1.0;
        deflate(v);
        double nv = v.norm();
        if (nv < 1e-14) continue;
        v /= nv;

        const long it_max = std::min<long>(n, std::max<long>(2 * job.want + 30, 60));
        Eigen::MatrixXd V(n, it_max + 1);
        V.col(0) = v;
        std::vector<double> alpha, beta;
        long j = 0;
        bool breakdown = false;
        while (j < it_max && found < job.want) {
            Eigen::VectorXd w = fac.solve(Eigen::VectorXd(V.col(j)));
            if (j > 0) w -= beta[j - 1] * V.col(j - 1);
            double a = V.col(j).dot(w);
            w -= a * V.col(j);
            // full reorthogonalization, two passes, plus deflation
            for (int pass = 0; pass < 2; ++pass) {
                for (long c = 0; c <= j; ++c) w -= V.col(c).dot(w) * V.col(c);
                deflate(w);
            }
            alpha.push_back(a);
            double b = w.norm();
            ++j;

            const bool last = (b < 1e-12) || (j == it_max);
            if (last || j % 5 == 0) {
                Eigen::MatrixXd T = Eigen::MatrixXd::Zero(j, j);
                for (long i = 0; i < j; ++i) {
                    T(i, i) = alpha[i];
                    if (i + 1 < j) T(i, i + 1) = T(i + 1, i) = beta[i];
                }
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> te(T);
                for (long r = 0; r < j && found < job.want; ++r) {
                    double theta = te.eigenvalues()[r];
                    if (theta == 0.0) continue;
                    double lam = sigma + 1.0 / theta;
                    if (!(lam > job.lo && lam <= job.hi)) continue;
                    Eigen::VectorXd y = V.leftCols(j) * te.eigenvectors().col(r);
                    double ny = y.norm();
                    if (ny < 1e-12) continue;
                    y /= ny;
                    double rho = y.dot(A.apply(y));
                    double res = (A.apply(y) - rho * y).norm();
                    if (res <= res_tol && rho > job.lo && rho <= job.hi) {
                        bool dup = false;
                        for (const auto& q : conv)
                            if (std::abs(q.dot(y)) > 0.9) dup = true;
                        if (!dup) {
                            for (const auto& q : conv) y -= q.dot(y) * q;
                            double ny2 = y.norm();
                            if (ny2 < 0.5) continue;
                            y /= ny2;
                            conv.push_back(y);
                            vals.push_back(rho);
                            ++found;
                        }
                    }
                }
            }
            if (b < 1e-12) {
                breakdown = true;
                break;
            }
            beta.push_back(b);
            V.col(j) = w / b;
        }
        (void)breakdown;
    }
    for (auto& q : conv) vecs.push_back(std::move(q));
    if (found < job.want) {
        Spectrum partial;
        partial.eigenvalues = vals;
        std::sort(partial.eigenvalues.begin(), partial.eigenvalues.end());
        throw EigsError("shift-invert Lanczos: slice did not converge within the restart budget", partial);
    }
}

Spectrum iterative_eigs_below(const SparseSymOperator& A, double E, const EigsOptions& opt, long want) {
    const long n = A.n;
    const double scale = matrix_scale(A);
    const double ztol = zero_tol_for(scale);

    // Gershgorin lower bound
    double lb = kInf;
    for (long i = 0; i < n; ++i) {
        double diag = 0.0, offsum = 0.0;
        for (long p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) {
            if (A.col[p] == i)
                diag = A.val[p];
            else
                offsum += std::abs(A.val[p]);
        }
        lb = std::min(lb, diag - offsum);
    }
    lb -= 1.0 + 1e-6 * scale;

    auto below_or_at = [&](double s) {
        Inertia in = inertia_at(A, s, ztol);
        return in.n_neg + in.n_zero;
    };

    // bisect (lb, E] into slices holding at most max_slice eigenvalues
    std::vector<SliceJob> jobs;
    struct Seg {
        double lo, hi;
        long clo, chi;
    };
    std::vector<Seg> stack{{lb, E, 0, want}};
    while (!stack.empty()) {
        Seg s = stack.back();
        stack.pop_back();
        long inside = s.chi - s.clo;
        if (inside == 0) continue;
        if (inside <= opt.max_slice || s.hi - s.lo < 1e3 * ztol) {
            jobs.push_back({s.lo, s.hi, inside});
            continue;
        }
        double mid = 0.5 * (s.lo + s.hi);
        long cmid = below_or_at(mid);
        stack.push_back({s.lo, mid, s.clo, cmid});
        stack.push_back({mid, s.hi, cmid, s.chi});
    }
    std::sort(jobs.begin(), jobs.end(), [](const SliceJob& a, const SliceJob& b) { return a.lo < b.lo; });

    std::vector<double> vals;
    std::vector<Eigen::VectorXd> vecs;
    for (std::size_t s = 0; s < jobs.size(); ++s)
        solve_slice(A, jobs[s], opt, scale, vals, vecs, 0x1a2b3c4dULL + s);

    std::vector<std::size_t> order(vals.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    Spectrum out;
    out.cutoff = E;
    out.tol = opt.residual_tol;
    out.has_vectors = opt.want_vectors;
    out.eigenvalues.resize(vals.size());
    if (opt.want_vectors) out.vectors.resize(n, static_cast<long>(vals.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
        out.eigenvalues[i] = vals[order[i]];
        if (opt.want_vectors) out.vectors.col(static_cast<long>(i)) = vecs[order[i]];
    }
    return out;
}

}  // namespace

Spectrum eigs_below(const SparseSymOperator& A, double E, const EigsOptions& opt) {
    if (!std::isfinite(E)) throw PreconditionError("eigs_below: cutoff must be finite");
    CountResult cr = count_interval(A, Interval::below(E));
    if (!opt.force_iterative && A.n <= opt.dense_crossover) return dense_eigs_below(A, E, opt, cr.count);
    return iterative_eigs_below(A, E, opt, cr.count);
}

// ---------------------------------------------------------------------------
// Projections, spectral shift, resolvent blocks

Eigen::MatrixXd spectral_projection(const Eigen::MatrixXd& A, Interval I) {
    CountResult cr = count_interval(A, I);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    const long n = A.rows();
    // pick the cr.count eigenvalues closest to I (they are the ones inside,
    // up to boundary roundoff)
    std::vector<std::pair<double, long>> dist;
    for (long i = 0; i < n; ++i) {
        double v = es.eigenvalues()[i];
        double dd = 0.0;
        if (v < I.lo) dd = I.lo - v;
        if (v > I.hi) dd = v - I.hi;
        dist.emplace_back(dd, i);
    }
    std::stable_sort(dist.begin(), dist.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<long> keep;
    for (long r = 0; r < cr.count; ++r) keep.push_back(dist[r].second);
    std::sort(keep.begin(), keep.end());
    Eigen::MatrixXd Q(n, cr.count);
    for (long r = 0; r < cr.count; ++r) Q.col(r) = es.eigenvectors().col(keep[r]);
    return Q;
}

Eigen::MatrixXd spectral_projection(const SparseSymOperator& A, Interval I) {
    return spectral_projection(A.to_dense(), I);
}

ShiftResult spectral_shift(const SparseSymOperator& A0, const SparseSymOperator& A1, double E) {
    if (A0.n != A1.n) throw PreconditionError("spectral_shift: dimension mismatch");
    CountResult c0 = count_interval(A0, Interval::below(E));
    CountResult c1 = count_interval(A1, Interval::below(E));
    return {c0.count - c1.count, c0.at_boundary || c1.at_boundary};
}

ShiftResult spectral_shift(const Eigen::MatrixXd& A0, const Eigen::MatrixXd& A1, double E) {
    if (A0.rows() != A1.rows()) throw PreconditionError("spectral_shift: dimension mismatch");
    CountResult c0 = count_interval(A0, Interval::below(E));
    CountResult c1 = count_interval(A1, Interval::below(E));
    return {c0.count - c1.count, c0.at_boundary || c1.at_boundary};
}

double resolvent_block_norm(const SparseSymOperator& A, double E, const std::vector<long>& X,
                            const std::vector<long>& Y) {
    if (X.empty() || Y.empty()) throw PreconditionError("resolvent_block_norm: empty node set");
    const double scale = matrix_scale(A);
    Eigen::MatrixXd M = A.to_dense();
    M.diagonal().array() -= E;
    BunchKaufmanLDLT fac(std::move(M));
    if (fac.min_block_eig() <= 1e3 * zero_tol_for(scale))
        throw SolverError("resolvent_block_norm: E is within tolerance of the spectrum");
    Eigen::MatrixXd RHS = Eigen::MatrixXd::Zero(A.n, static_cast<long>(Y.size()));
    for (std::size_t c = 0; c < Y.size(); ++c) RHS(Y[c], static_cast<long>(c)) = 1.0;
    fac.solve_in_place(RHS);
    Eigen::MatrixXd block(static_cast<long>(X.size()), static_cast<long>(Y.size()));
    for (std::size_t r = 0; r < X.size(); ++r) block.row(static_cast<long>(r)) = RHS.row(X[r]);
    if (block.rows() == 1 && block.cols() == 1) return std::abs(block(0, 0));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(block);
    return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

}  // namespace rsl
