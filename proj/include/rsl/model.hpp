#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rsl/common.hpp"

namespace rsl {

// ---------------------------------------------------------------------------
// Single-site bump profiles. All profiles are supported in the sup-norm ball
// of radius R and satisfy the sandwich
//     v_minus * 1_{B_r(0)} <= V_0 <= v_plus * 1_{B_R(0)},
// with half-open balls B_a(0) = [-a, a)^d so that integer translates of the
// flat tile partition space without double counting.

enum class BumpKind { FlatTile, Tent, BallIndicator };

std::string to_string(BumpKind k);
BumpKind bump_kind_from_string(const std::string& s);

struct BumpProfile {
    BumpKind kind = BumpKind::FlatTile;
    double r = 0.5;
    double R = 0.5;
    double v_minus = 1.0;
    double v_plus = 1.0;

    /// V_0 at a point u (d coordinates used). Flat tile and tent have height 1
    /// and tile space exactly; ball indicator has height v_plus.
    double value(const double* u, int d) const;

    /// Translate V_k(u) = V_0(u - k).
    double translated(const double* u, const GridIndex& k, int d) const;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Piecewise-linear single-site density on [0, 1].

struct DensitySpec {
    std::vector<double> knots;   // sorted, first 0, last 1
    std::vector<double> values;  // nonnegative density values at knots
    bool lipschitz_regular = false;

    // Declared constants; filled from the observed data by finalize() when
    // left negative.
    double K = -1.0;
    double rho_minus = -1.0;
    double rho_plus = -1.0;

    static DensitySpec uniform();
    static DensitySpec linear(double at0, double at1);

    void finalize();        // derive K, rho_minus, rho_plus from the knots
    void validate() const;  // unit mass, support, regularity when flagged

    double integral() const;  // exact trapezoid
    double value_at(double x) const;
    double cdf(double x) const;
    double inverse_cdf(double u) const;
};

// ---------------------------------------------------------------------------
// Coupling configurations on the index lattice Gamma_L.

struct Configuration {
    std::vector<GridIndex> indices;
    std::vector<double> values;
    std::uint64_t seed = 0;
    bool out_of_support = false;

    std::size_t size() const { return values.size(); }
};

/// All k in Z^d with |k_i| <= (L+R)/2 per coordinate, in lexicographic order.
std::vector<GridIndex> index_set(double L, double R, int d);

Configuration sample_configuration(const DensitySpec& density, const std::vector<GridIndex>& indices,
                                   std::uint64_t seed);

Configuration shift_configuration(const Configuration& omega, double tau);

// ---------------------------------------------------------------------------
// Deformation profile G and periodic background V_o, as named scalar fields.

struct FieldSpec {
    std::string kind = "one";  // "one" | "zero" | "const" | "cosine"
    double value = 1.0;        // const level, or base level for cosine
    double amp = 0.0;          // cosine amplitude

    double eval(const double* x, int d) const;
};

// ---------------------------------------------------------------------------

struct Thresholds {
    double E_spc = 0.0;
    double E_M = 0.0;

    // Captured model constants so xi can be evaluated for any scales.
    double prefactor = 0.0;  // mu pi^2 G_-^2 / (2 R^2 (2R+1)^d v_+)
    double V_minus = 0.0;
    double v_plus = 0.0;
    double V_o_norm = 0.0;
    int d = 1;

    /// xi_{L,ell,n,r} = prefactor * (V_- - v_+ L^d e^{-m ell} - 26 sqrt(n) ell^-r) - ||V_o||
    double xi(double L, double ell, double n, double r, double m) const;
};

struct ModelParams {
    int d = 1;
    double mu = 1.0;
    double L = 8.0;
    double h = 0.25;
    BumpProfile bump;
    DensitySpec density = DensitySpec::uniform();
    FieldSpec G{"one", 1.0, 0.0};
    FieldSpec V_o{"zero", 0.0, 0.0};
    std::uint64_t seed = 0;

    void validate() const;

    int nodes_per_dim() const;         // L/h - 1
    std::vector<GridIndex> lattice() const { return index_set(L, bump.R, d); }

    /// Covering bounds V_-, V_+ of sum_k V_k and range of G, scanned over the
    /// interior grid nodes of Lambda_L.
    struct ScanBounds {
        double V_minus, V_plus;
        double G_minus, G_plus;
        double V_o_norm;
    };
    ScanBounds scan_bounds() const;

    /// True when sum_k V_k == 1 on every grid node (flat tile / tent).
    bool partition_of_unity() const;

    Thresholds thresholds() const;

    std::string to_json_string() const;
    static ModelParams from_json_string(const std::string& text);
    std::uint64_t hash() const { return fnv1a(to_json_string()); }
};

/// V_0 evaluated on the interior nodes of the model grid; throws if the
/// (V_1) sandwich fails at any node.
std::vector<double> build_bump_profile(BumpKind kind, double r, double R, double v_minus, double v_plus,
                                       const ModelParams& grid_owner);

}  // namespace rsl
