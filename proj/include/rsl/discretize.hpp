#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "rsl/common.hpp"
#include "rsl/model.hpp"

namespace rsl {

/// Uniform tensor grid of interior nodes of Lambda_L (Dirichlet: boundary
/// nodes are excluded). Node (i_0,..,i_{d-1}) sits at -L/2 + (i_c + 1) h.
struct Grid {
    int d = 1;
    double h = 0.25;
    double L = 8.0;
    int m = 31;  // interior nodes per dimension, L/h - 1

    static Grid of(const ModelParams& p) { return Grid{p.d, p.h, p.L, p.nodes_per_dim()}; }

    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < d; ++i) s *= static_cast<std::size_t>(m);
        return s;
    }
    double coord(int /*dim*/, int idx) const { return -L / 2 + (idx + 1) * h; }
    std::size_t flatten(const GridIndex& ix) const {
        std::size_t f = 0;
        for (int c = 0; c < d; ++c) f = f * m + static_cast<std::size_t>(ix[c]);
        return f;
    }
    GridIndex unflatten(std::size_t f) const {
        GridIndex ix{0, 0, 0};
        for (int c = d - 1; c >= 0; --c) {
            ix[c] = static_cast<int>(f % m);
            f /= m;
        }
        return ix;
    }
    void node_coords(std::size_t f, double* x) const {
        GridIndex ix = unflatten(f);
        for (int c = 0; c < d; ++c) x[c] = coord(c, ix[c]);
    }
};

/// Symmetric sparse matrix in CSR with sorted column indices (the ordering is
/// part of the in-memory contract), plus the node geometry of its rows.
struct SparseSymOperator {
    long n = 0;
    std::vector<long> row_ptr;
    std::vector<long> col;
    std::vector<double> val;

    int d = 1;
    double h = 0.25;
    std::vector<std::array<double, 3>> node;  // coordinates per row

    std::uint64_t params_hash = 0;
    std::uint64_t config_seed = 0;

    void matvec(const double* x, double* y) const;
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd to_dense() const;
    double max_abs() const;
    double max_asymmetry() const;  // 0 by construction; kept as a test hook
    bool is_tridiagonal() const;

    /// Rows/cols restricted to `keep` (sorted row indices).
    SparseSymOperator principal_submatrix(const std::vector<long>& keep) const;
};

/// Assemble CSR from triplets (upper triangle given once, mirrored exactly).
struct SymTripletBuilder {
    explicit SymTripletBuilder(long n) : n_(n) {}
    void add_diag(long i, double v);
    void add_offdiag(long i, long j, double v);  // i != j, stored symmetrically
    SparseSymOperator build() const;

  private:
    long n_;
    std::vector<long> bi_, bj_;
    std::vector<double> bv_;
};

struct PotentialField {
    std::vector<double> value;            // per interior node
    std::vector<std::size_t> contributors;  // lattice positions with support in the region
};

/// -mu Delta with Dirichlet conditions: (2d) mu/h^2 on the diagonal,
/// -mu/h^2 between grid neighbours.
SparseSymOperator laplacian_dirichlet(const Grid& grid, double mu);

/// sum_k omega_k V_k evaluated on the nodes of `region` (defaults to the full
/// grid). Couplings within R of the region contribute through their clipped
/// bumps.
PotentialField potential_field(const ModelParams& params, const Configuration& omega);

/// H = diag(G) (-mu Delta) diag(G) + diag(V_o + V_omega).
SparseSymOperator assemble(const ModelParams& params, const Configuration& omega);

/// Same operator with per-node fields supplied directly; used by assemble and
/// by the auxiliary deformation below.
SparseSymOperator assemble_fields(const ModelParams& params, const std::vector<double>& G_nodes,
                                  const std::vector<double>& W_nodes);

/// Dirichlet restriction onto interior nodes of Lambda_ell(x) within Lambda_L
/// (a principal submatrix of the full assembly; the parent configuration is
/// shared).
SparseSymOperator restrict_box(const ModelParams& params, const Configuration& omega,
                               const std::array<double, 3>& x, double ell);

/// V^{-1/2} (H - E) V^{-1/2} with V = sum_k V_k: deformation G -> G V^{-1/2},
/// background (V_o - E)/V, potential weights V_k / V.
SparseSymOperator aux_operator(const ModelParams& params, const Configuration& omega, double E);

/// Matrix Market coordinate format, real symmetric, lower triangle, 1-based.
void export_matrix_market(const SparseSymOperator& A, std::ostream& os);

}  // namespace rsl
