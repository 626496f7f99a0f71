#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rsl/common.hpp"
#include "rsl/discretize.hpp"
#include "rsl/model.hpp"
#include "rsl/spectral.hpp"

namespace rsl {

/// Multi-parameter family A + sum_k s_k B_k on (-epsilon, epsilon)^N.
struct ParamFamily {
    Eigen::MatrixXd A;
    std::vector<Eigen::MatrixXd> directions;
    double epsilon = 1.0 / 13.0;

    Eigen::MatrixXd at(const Eigen::VectorXd& s) const;
    Eigen::MatrixXd at1(std::size_t k, double s) const;  // one-parameter section

    struct DirectionCheck {
        double max_norm = 0.0;     // max_k ||B_k||
        double sum_max_eig = 0.0;  // lambda_max(sum B_k)
        double min_eig = 0.0;      // min_k lambda_min(B_k)
        bool ok = false;           // ||B_k|| <= 1 and sum B_k <= 1 within tol
    };
    DirectionCheck verify(double tol = 1e-10) const;
};

/// Cluster window under the standing normalization |I| <= 1/2, eps < 1/12,
/// with the 6 eps gap verified on the base operator.
struct ClusterWindow {
    Interval I;
    double epsilon = 1.0 / 13.0;
    long n = 0;  // filled by validate_against

    Interval I_eps() const { return I.inflated(epsilon); }
    void validate_against(const Eigen::MatrixXd& A);
};

/// (1/n) tr(P B P) for P the spectral projection onto I.
double feynman_hellmann_slope(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, Interval I);

struct DerivativeBoundReport {
    double dP_norm = 0.0;
    double d2P_norm = 0.0;
    double dP_bound = 0.0;   // 1/(2 eps)
    double d2P_bound = 0.0;  // 1/(pi eps^2)
    double h1 = 0.0, h2 = 0.0;
    bool dP_ok = false, d2P_ok = false;  // within 1.05x of the bounds
};

/// Central finite differences of the projector onto I_eps along direction k
/// at s0. Refuses when the 4 eps gap fails anywhere on the stencil.
DerivativeBoundReport projection_derivative_norm(const ParamFamily& fam, const ClusterWindow& win,
                                                 std::size_t k, double s0, double h1 = -1.0, double h2 = -1.0);

struct FlatnessReport {
    double delta = 0.0;     // measured sup_s sup_i |E_i^s - Ebar^s|
    double sup_norm = 0.0;  // sup_s ||P_s (B - d_s Ebar) P_s||
    double bound = 0.0;     // 9 sqrt(delta / eps)
    bool hypothesis_ok = false;  // delta < eps
    bool violated = false;       // sup_norm > bound (1 + tol)
    double tol = 0.05;
    int grid_points = 0;
};

FlatnessReport cluster_flatness(const ParamFamily& fam, const ClusterWindow& win, std::size_t k,
                                int grid_points = 41, int workers = 1);

struct CartanOptions {
    long n_draws = 10000;
    std::uint64_t seed = 1;
    double delta0 = -1.0;  // witness level; < 0 means "find one by sampling"
    long witness_attempts = 512;
    long grid_points = 4096;  // N = 1 scan resolution
    int workers = 1;
};

struct CartanReport {
    double mc_estimate = 0.0;  // |{s : spac < delta}| / (2 eps)^N
    double ci_low = 0.0, ci_high = 0.0;
    long hits = 0, draws = 0;
    double grid_estimate = -1.0;  // N = 1 only
    bool conditioned = false;     // witness with spac > delta0 found
    double delta0 = 0.0;
    double witness_spacing = 0.0;
    double log_ratio = 0.0;  // |log delta / log delta0|
};

CartanReport cartan_sublevel_measure(const ParamFamily& fam, const ClusterWindow& win, double delta,
                                     const CartanOptions& opt = {});

struct GoodConfigOptions {
    long eval_budget = 400;
    double r = 1.0;  // exponent in the cube-shrink schedule ell^{-(2d+2r)}
    double m = 1.0;  // localization rate entering the xi threshold
    int line_points = 9;
};

struct GoodConfigResult {
    Configuration omega_hat;
    double achieved_spacing = 0.0;
    double seed_spacing = 0.0;
    double reference_bound = 0.0;  // 8 eps ell^{-(n-1)(2d+2r)}
    bool in_cube = true;
    bool complete = false;
    long evals = 0;
    long n = 0;
};

/// Coordinate-wise splitting search around omega0, restricted to couplings in
/// Gamma_L within Lambda_ell(x) and the cube of half-width epsilon.
GoodConfigResult search_good_configuration(const ModelParams& params, const Configuration& omega0,
                                           const std::array<double, 3>& x, double ell, double epsilon,
                                           Interval window, const GoodConfigOptions& opt = {});

}  // namespace rsl
