#include "rsl/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

namespace rsl {

// ---------------------------------------------------------------------------
// SparseSymOperator

void SparseSymOperator::matvec(const double* x, double* y) const {
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (long p = row_ptr[i]; p < row_ptr[i + 1]; ++p) acc += val[p] * x[col[p]];
        y[i] = acc;
    }
}

Eigen::VectorXd SparseSymOperator::apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(n);
    matvec(x.data(), y.data());
    return y;
}

Eigen::MatrixXd SparseSymOperator::to_dense() const {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (long i = 0; i < n; ++i)
        for (long p = row_ptr[i]; p < row_ptr[i + 1]; ++p) D(i, col[p]) = val[p];
    return D;
}

double SparseSymOperator::max_abs() const {
    double m = 0.0;
    for (double v : val) m = std::max(m, std::abs(v));
    return m;
}

double SparseSymOperator::max_asymmetry() const {
    Eigen::MatrixXd D = to_dense();
    return (D - D.transpose()).cwiseAbs().maxCoeff();
}

bool SparseSymOperator::is_tridiagonal() const {
    for (long i = 0; i < n; ++i)
        for (long p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
            if (std::abs(col[p] - i) > 1) return false;
    return true;
}

SparseSymOperator SparseSymOperator::principal_submatrix(const std::vector<long>& keep) const {
    std::vector<long> where(n, -1);
    for (std::size_t r = 0; r < keep.size(); ++r) where[keep[r]] = static_cast<long>(r);
    SparseSymOperator S;
    S.n = static_cast<long>(keep.size());
    S.d = d;
    S.h = h;
    S.params_hash = params_hash;
    S.config_seed = config_seed;
    S.row_ptr.assign(S.n + 1, 0);
    S.node.resize(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) S.node[r] = node[keep[r]];
    for (std::size_t r = 0; r < keep.size(); ++r) {
        long i = keep[r];
        for (long p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
            if (where[col[p]] >= 0) ++S.row_ptr[r + 1];
    }
    for (long r = 0; r < S.n; ++r) S.row_ptr[r + 1] += S.row_ptr[r];
    S.col.resize(S.row_ptr[S.n]);
    S.val.resize(S.row_ptr[S.n]);
    std::vector<long> cursor(S.row_ptr.begin(), S.row_ptr.end() - 1);
    for (std::size_t r = 0; r < keep.size(); ++r) {
        long i = keep[r];
        for (long p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            long jc = where[col[p]];
            if (jc < 0) continue;
            S.col[cursor[r]] = jc;
            S.val[cursor[r]] = val[p];
            ++cursor[r];
        }
    }
    return S;  // column order inherited from the parent's sorted order
}

// ---------------------------------------------------------------------------
// SymTripletBuilder

void SymTripletBuilder::add_diag(long i, double v) {
    bi_.push_back(i);
    bj_.push_back(i);
    bv_.push_back(v);
}

void SymTripletBuilder::add_offdiag(long i, long j, double v) {
    bi_.push_back(i);
    bj_.push_back(j);
    bv_.push_back(v);
    bi_.push_back(j);
    bj_.push_back(i);
    bv_.push_back(v);
}

SparseSymOperator SymTripletBuilder::build() const {
    std::vector<std::size_t> order(bi_.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (bi_[a] != bi_[b]) return bi_[a] < bi_[b];
        return bj_[a] < bj_[b];
    });
    SparseSymOperator A;
    A.n = n_;
    A.row_ptr.assign(n_ + 1, 0);
    // accumulate duplicates, keep rows sorted by column
    for (std::size_t k = 0; k < order.size();) {
        std::size_t o = order[k];
        long i = bi_[o], j = bj_[o];
        double v = 0.0;
        while (k < order.size() && bi_[order[k]] == i && bj_[order[k]] == j) {
            v += bv_[order[k]];
            ++k;
        }
        A.col.push_back(j);
        A.val.push_back(v);
        ++A.row_ptr[i + 1];
    }
    for (long i = 0; i < n_; ++i) A.row_ptr[i + 1] += A.row_ptr[i];
    return A;
}

// ---------------------------------------------------------------------------
// Laplacian

SparseSymOperator laplacian_dirichlet(const Grid& grid, double mu) {
    if (!(mu > 0.0)) throw PreconditionError("laplacian: mu must be positive");
    const long n = static_cast<long>(grid.size());
    const double diag = 2.0 * grid.d * mu / (grid.h * grid.h);
    const double off = -mu / (grid.h * grid.h);
    SymTripletBuilder b(n);
    for (long f = 0; f < n; ++f) {
        b.add_diag(f, diag);
        GridIndex ix = grid.unflatten(static_cast<std::size_t>(f));
        for (int c = 0; c < grid.d; ++c) {
            if (ix[c] + 1 < grid.m) {
                GridIndex jx = ix;
                ++jx[c];
                b.add_offdiag(f, static_cast<long>(grid.flatten(jx)), off);
            }
        }
    }
    SparseSymOperator A = b.build();
    A.d = grid.d;
    A.h = grid.h;
    A.node.resize(n, {0.0, 0.0, 0.0});
    for (long f = 0; f < n; ++f) grid.node_coords(static_cast<std::size_t>(f), A.node[f].data());
    return A;
}

// ---------------------------------------------------------------------------
// Potential and assembly

PotentialField potential_field(const ModelParams& params, const Configuration& omega) {
    Grid grid = Grid::of(params);
    PotentialField f;
    f.value.assign(grid.size(), 0.0);
    double x[3] = {0, 0, 0};
    for (std::size_t k = 0; k < omega.indices.size(); ++k) {
        const GridIndex& kk = omega.indices[k];
        double w = omega.values[k];
        bool touched = false;
        // nodes within the bump's support box around k
        int lo[3], hi[3];
        for (int c = 0; c < grid.d; ++c) {
            // node index i has coord -L/2 + (i+1)h; support is [k - R, k + R)
            double cl = kk[c] - params.bump.R;
            double ch = kk[c] + params.bump.R;
            lo[c] = std::max(0, static_cast<int>(std::ceil((cl + grid.L / 2) / grid.h - 1 - 1e-12)));
            hi[c] = std::min(grid.m - 1, static_cast<int>(std::floor((ch + grid.L / 2) / grid.h - 1 + 1e-12)));
        }
        bool box_ok = true;
        for (int c = 0; c < grid.d; ++c)
            if (lo[c] > hi[c]) box_ok = false;
        if (!box_ok) continue;
        GridIndex ix{0, 0, 0};
        std::function<void(int)> rec = [&](int c) {
            if (c == grid.d) {
                for (int cc = 0; cc < grid.d; ++cc) x[cc] = grid.coord(cc, ix[cc]);
                double v = params.bump.translated(x, kk, grid.d);
                if (v != 0.0) {
                    f.value[grid.flatten(ix)] += w * v;
                    touched = true;
                }
                return;
            }
            for (int i = lo[c]; i <= hi[c]; ++i) {
                ix[c] = i;
                rec(c + 1);
            }
        };
        rec(0);
        if (touched) f.contributors.push_back(k);
    }
    return f;
}

SparseSymOperator assemble_fields(const ModelParams& params, const std::vector<double>& G_nodes,
                                  const std::vector<double>& W_nodes) {
    Grid grid = Grid::of(params);
    for (double g : G_nodes)
        if (!(g > 0.0)) throw PreconditionError("assemble: G must be positive at every node");
    SparseSymOperator A = laplacian_dirichlet(grid, params.mu);
    for (long i = 0; i < A.n; ++i) {
        for (long p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) {
            long j = A.col[p];
            // symmetric by canonical factor order
            double gij = (i <= j) ? G_nodes[i] * G_nodes[j] : G_nodes[j] * G_nodes[i];
            A.val[p] *= gij;
            if (i == j) A.val[p] += W_nodes[i];
        }
    }
    A.params_hash = params.hash();
    A.config_seed = 0;
    return A;
}

SparseSymOperator assemble(const ModelParams& params, const Configuration& omega) {
    Grid grid = Grid::of(params);
    PotentialField pot = potential_field(params, omega);
    std::vector<double> Gn(grid.size()), Wn(grid.size());
    double x[3] = {0, 0, 0};
    for (std::size_t f = 0; f < grid.size(); ++f) {
        grid.node_coords(f, x);
        Gn[f] = params.G.eval(x, params.d);
        Wn[f] = params.V_o.eval(x, params.d) + pot.value[f];
    }
    SparseSymOperator A = assemble_fields(params, Gn, Wn);
    A.config_seed = omega.seed;
    return A;
}

SparseSymOperator restrict_box(const ModelParams& params, const Configuration& omega,
                               const std::array<double, 3>& x, double ell) {
    if (ell <= 2.0 * params.h) throw PreconditionError("restrict_box: ell must exceed 2h");
    for (int c = 0; c < params.d; ++c)
        if (std::abs(x[c]) > params.L / 2) throw PreconditionError("restrict_box: center outside Lambda_L");
    SparseSymOperator A = assemble(params, omega);
    if (ell >= params.L) return A;
    std::vector<long> keep;
    for (long i = 0; i < A.n; ++i) {
        bool inside = true;
        for (int c = 0; c < params.d; ++c) {
            double lo = std::max(-params.L / 2, x[c] - ell / 2);
            double hi = std::min(params.L / 2, x[c] + ell / 2);
            double u = A.node[i][c];
            if (!(u > lo + 1e-12 && u < hi - 1e-12)) inside = false;
        }
        if (inside) keep.push_back(i);
    }
    if (keep.empty()) throw PreconditionError("restrict_box: sub-box has no interior nodes");
    return A.principal_submatrix(keep);
}

SparseSymOperator aux_operator(const ModelParams& params, const Configuration& omega, double E) {
    Grid grid = Grid::of(params);
    Configuration ones = omega;
    std::fill(ones.values.begin(), ones.values.end(), 1.0);
    PotentialField cover = potential_field(params, ones);   // V = sum_k V_k
    PotentialField pot = potential_field(params, omega);    // V_omega
    std::vector<double> Gn(grid.size()), Wn(grid.size());
    double x[3] = {0, 0, 0};
    for (std::size_t f = 0; f < grid.size(); ++f) {
        double V = cover.value[f];
        if (!(V > 0.0)) throw PreconditionError("aux_operator: covering sum vanishes at a node");
        grid.node_coords(f, x);
        Gn[f] = params.G.eval(x, params.d) / std::sqrt(V);
        Wn[f] = (params.V_o.eval(x, params.d) - E + pot.value[f]) / V;
    }
    SparseSymOperator A = assemble_fields(params, Gn, Wn);
    A.config_seed = omega.seed;
    return A;
}

void export_matrix_market(const SparseSymOperator& A, std::ostream& os) {
    long nnz_lower = 0;
    for (long i = 0; i < A.n; ++i)
        for (long p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p)
            if (A.col[p] <= i) ++nnz_lower;
    os << "%%MatrixMarket matrix coordinate real symmetric\n";
    os << A.n << " " << A.n << " " << nnz_lower << "\n";
    char buf[96];
    for (long i = 0; i < A.n; ++i) {
        for (long p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) {
            if (A.col[p] > i) continue;
            std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", i + 1, A.col[p] + 1, A.val[p]);
            os << buf;
        }
    }
}

}  // namespace rsl
