#include "rsl/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include "rsl/stats.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rsl {

namespace {

double sym_op_norm(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return std::max(std::abs(es.eigenvalues().minCoeff()), std::abs(es.eigenvalues().maxCoeff()));
}

struct GapScan {
    long inside = 0;
    double gap = kInf;  // distance from I to the eigenvalues outside I
};

GapScan gap_scan(const Eigen::MatrixXd& A, Interval I) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    GapScan g;
    for (long i = 0; i < es.eigenvalues().size(); ++i) {
        double v = es.eigenvalues()[i];
        if (I.contains(v)) {
            ++g.inside;
        } else {
            g.gap = std::min(g.gap, v < I.lo ? I.lo - v : v - I.hi);
        }
    }
    return g;
}

std::vector<double> eigs_in(const Eigen::MatrixXd& A, Interval I) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    std::vector<double> v;
    for (long i = 0; i < es.eigenvalues().size(); ++i)
        if (I.contains(es.eigenvalues()[i])) v.push_back(es.eigenvalues()[i]);
    return v;
}

double spac_in(const Eigen::MatrixXd& A, Interval I) {
    auto v = eigs_in(A, I);
    if (v.size() < 2) return kInf;
    double best = kInf;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) best = std::min(best, v[i + 1] - v[i]);
    return best;
}

}  // namespace

Eigen::MatrixXd ParamFamily::at(const Eigen::VectorXd& s) const {
    Eigen::MatrixXd M = A;
    for (std::size_t k = 0; k < directions.size(); ++k) M += s[static_cast<long>(k)] * directions[k];
    return M;
}

Eigen::MatrixXd ParamFamily::at1(std::size_t k, double s) const { return A + s * directions[k]; }

ParamFamily::DirectionCheck ParamFamily::verify(double tol) const {
    DirectionCheck c;
    if (directions.empty()) return c;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(A.rows(), A.cols());
    c.min_eig = kInf;
    for (const auto& B : directions) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B, Eigen::EigenvaluesOnly);
        c.max_norm = std::max(c.max_norm,
                              std::max(std::abs(es.eigenvalues().minCoeff()), std::abs(es.eigenvalues().maxCoeff())));
        c.min_eig = std::min(c.min_eig, es.eigenvalues().minCoeff());
        sum += B;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sum, Eigen::EigenvaluesOnly);
    c.sum_max_eig = es.eigenvalues().maxCoeff();
    c.ok = c.max_norm <= 1.0 + tol && c.sum_max_eig <= 1.0 + tol;
    return c;
}

void ClusterWindow::validate_against(const Eigen::MatrixXd& A) {
    if (!(I.length() <= 0.5))
        throw PreconditionError("cluster window: |I| must be at most 1/2");
    if (!(epsilon > 0.0 && epsilon < 1.0 / 12.0))
        throw PreconditionError("cluster window: epsilon must lie in (0, 1/12)");
    GapScan g = gap_scan(A, I);
    if (g.inside == 0) throw PreconditionError("cluster window: no eigenvalues in I");
    if (g.gap < 6.0 * epsilon)
        throw PreconditionError("cluster window: 6 epsilon gap condition fails on the base operator");
    n = g.inside;
}

double feynman_hellmann_slope(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, Interval I) {
    Eigen::MatrixXd Q = spectral_projection(A, I);
    if (Q.cols() == 0) throw PreconditionError("feynman_hellmann_slope: empty cluster");
    return (Q.transpose() * B * Q).trace() / static_cast<double>(Q.cols());
}

namespace {

Eigen::MatrixXd projector_checked(const ParamFamily& fam, const ClusterWindow& win, std::size_t k, double s) {
    Eigen::MatrixXd M = fam.at1(k, s);
    GapScan g = gap_scan(M, win.I_eps());
    if (g.inside != win.n || g.gap < 4.0 * win.epsilon * (1.0 - 1e-9))
        throw PreconditionError("projection derivative: 4 epsilon gap fails along the stencil");
    Eigen::MatrixXd Q = spectral_projection(M, win.I_eps());
    return Q * Q.transpose();
}

}  // namespace

DerivativeBoundReport projection_derivative_norm(const ParamFamily& fam, const ClusterWindow& win,
                                                 std::size_t k, double s0, double h1, double h2) {
    if (k >= fam.directions.size()) throw PreconditionError("projection derivative: direction out of range");
    const double eps = win.epsilon;
    DerivativeBoundReport rep;
    rep.h1 = h1 > 0.0 ? h1 : 1e-5 * eps;
    rep.h2 = h2 > 0.0 ? h2 : 1e-3 * eps;
    rep.dP_bound = 1.0 / (2.0 * eps);
    rep.d2P_bound = 1.0 / (M_PI * eps * eps);

    Eigen::MatrixXd Pm = projector_checked(fam, win, k, s0 - rep.h1);
    Eigen::MatrixXd Pp = projector_checked(fam, win, k, s0 + rep.h1);
    rep.dP_norm = sym_op_norm((Pp - Pm) / (2.0 * rep.h1));

    Eigen::MatrixXd P0 = projector_checked(fam, win, k, s0);
    Eigen::MatrixXd Qm = projector_checked(fam, win, k, s0 - rep.h2);
    Eigen::MatrixXd Qp = projector_checked(fam, win, k, s0 + rep.h2);
    rep.d2P_norm = sym_op_norm((Qp - 2.0 * P0 + Qm) / (rep.h2 * rep.h2));

    rep.dP_ok = rep.dP_norm <= rep.dP_bound * 1.05;
    rep.d2P_ok = rep.d2P_norm <= rep.d2P_bound * 1.05;
    return rep;
}

FlatnessReport cluster_flatness(const ParamFamily& fam, const ClusterWindow& win, std::size_t k,
                                int grid_points, int workers) {
    if (k >= fam.directions.size()) throw PreconditionError("cluster_flatness: direction out of range");
    if (grid_points < 41) grid_points = 41;
    const double eps = win.epsilon;
    const double hFD = 1e-5 * eps;
    const Interval Ie = win.I_eps();

    std::vector<double> spread(grid_points), tnorm(grid_points);
    std::vector<int> gap_ok(grid_points, 1);

    auto eval_point = [&](int j) {
        // strictly inside (-eps, eps)
        const double s = -eps + (j + 1) * (2.0 * eps) / (grid_points + 1);
        Eigen::MatrixXd M = fam.at1(k, s);
        GapScan g = gap_scan(M, Ie);
        if (g.inside != win.n || g.gap < 4.0 * eps * (1.0 - 1e-9)) {
            gap_ok[j] = 0;
            return;
        }
        auto ev = eigs_in(M, Ie);
        double ebar = 0.0;
        for (double v : ev) ebar += v;
        ebar /= static_cast<double>(ev.size());
        double sp = 0.0;
        for (double v : ev) sp = std::max(sp, std::abs(v - ebar));
        spread[j] = sp;

        auto mean_in = [&](double ss) {
            auto e2 = eigs_in(fam.at1(k, ss), Ie);
            double m = 0.0;
            for (double v : e2) m += v;
            return m / static_cast<double>(e2.size());
        };
        const double dEbar = (mean_in(s + hFD) - mean_in(s - hFD)) / (2.0 * hFD);
        Eigen::MatrixXd Q = spectral_projection(M, Ie);
        Eigen::MatrixXd T = Q.transpose() * (fam.directions[k] - dEbar * Eigen::MatrixXd::Identity(M.rows(), M.cols())) * Q;
        tnorm[j] = sym_op_norm(T);
    };

    if (workers != 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(workers > 0 ? workers : omp_get_max_threads())
#endif
        for (int j = 0; j < grid_points; ++j) eval_point(j);
    } else {
        for (int j = 0; j < grid_points; ++j) eval_point(j);
    }

    for (int j = 0; j < grid_points; ++j)
        if (!gap_ok[j]) throw PreconditionError("cluster_flatness: gap condition fails on the s-grid");

    FlatnessReport rep;
    rep.grid_points = grid_points;
    for (int j = 0; j < grid_points; ++j) {
        rep.delta = std::max(rep.delta, spread[j]);
        rep.sup_norm = std::max(rep.sup_norm, tnorm[j]);
    }
    rep.bound = 9.0 * std::sqrt(rep.delta / eps);
    rep.hypothesis_ok = rep.delta < eps;
    // absolute floor absorbs finite-difference noise when the bound is 0
    rep.violated = rep.sup_norm > rep.bound * (1.0 + rep.tol) + 1e-9;
    return rep;
}

// ---------------------------------------------------------------------------
// Cartan sublevel measure

CartanReport cartan_sublevel_measure(const ParamFamily& fam, const ClusterWindow& win, double delta,
                                     const CartanOptions& opt) {
    const std::size_t N = fam.directions.size();
    if (N == 0) throw PreconditionError("cartan: family has no directions");
    const double eps = win.epsilon;
    const Interval Ie = win.I_eps();
    CartanReport rep;

    auto spac_at = [&](const Eigen::VectorXd& s) { return spac_in(fam.at(s), Ie); };

    // witness search
    double best = spac_at(Eigen::VectorXd::Zero(static_cast<long>(N)));
    for (long a = 0; a < opt.witness_attempts; ++a) {
        std::mt19937_64 eng(splitmix64(derive_seed(opt.seed ^ 0x5eedf00dULL, static_cast<std::uint64_t>(a))));
        Eigen::VectorXd s(static_cast<long>(N));
        for (std::size_t i = 0; i < N; ++i) s[static_cast<long>(i)] = eps * (2.0 * u01(eng) - 1.0);
        best = std::max(best, spac_at(s));
        if (opt.delta0 > 0.0 && best > opt.delta0) break;
    }
    rep.witness_spacing = best;
    rep.delta0 = opt.delta0 > 0.0 ? opt.delta0 : 0.5 * best;
    rep.conditioned = std::isfinite(best) && best > rep.delta0 && rep.delta0 > 0.0;
    rep.log_ratio = (rep.delta0 > 0.0 && rep.delta0 != 1.0 && delta > 0.0)
                        ? std::abs(std::log(delta) / std::log(rep.delta0))
                        : 0.0;

    // Monte Carlo estimate of the normalized sublevel measure
    rep.draws = opt.n_draws;
    std::vector<unsigned char> hit(static_cast<std::size_t>(opt.n_draws), 0);
    auto draw_one = [&](long i) {
        std::mt19937_64 eng(splitmix64(derive_seed(opt.seed, static_cast<std::uint64_t>(i))));
        Eigen::VectorXd s(static_cast<long>(N));
        for (std::size_t c = 0; c < N; ++c) s[static_cast<long>(c)] = eps * (2.0 * u01(eng) - 1.0);
        if (spac_at(s) < delta) hit[static_cast<std::size_t>(i)] = 1;
    };
    if (opt.workers != 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) num_threads(opt.workers > 0 ? opt.workers : omp_get_max_threads())
#endif
        for (long i = 0; i < opt.n_draws; ++i) draw_one(i);
    } else {
        for (long i = 0; i < opt.n_draws; ++i) draw_one(i);
    }
    for (unsigned char hbit : hit) rep.hits += hbit;
    WilsonInterval w = wilson_interval(rep.hits, rep.draws);
    rep.mc_estimate = w.p_hat;
    rep.ci_low = w.lo;
    rep.ci_high = w.hi;

    // adaptive grid scan for one-parameter families
    if (N == 1) {
        const long G = std::max<long>(opt.grid_points, 16);
        auto f = [&](double s) {
            Eigen::VectorXd v(1);
            v[0] = s;
            return spac_at(v) - delta;
        };
        std::vector<double> xs(G + 1), fs(G + 1);
        for (long g = 0; g <= G; ++g) {
            xs[g] = -eps + 2.0 * eps * static_cast<double>(g) / G;
            fs[g] = f(xs[g]);
        }
        double measure = 0.0;
        for (long g = 0; g < G; ++g) {
            double a = xs[g], b = xs[g + 1], fa = fs[g], fb = fs[g + 1];
            if (fa < 0.0 && fb < 0.0) {
                measure += b - a;
            } else if ((fa < 0.0) != (fb < 0.0)) {
                // bisect the crossing
                double lo = a, hi = b, flo = fa;
                for (int it = 0; it < 60; ++it) {
                    double mid = 0.5 * (lo + hi);
                    double fm = f(mid);
                    if ((flo < 0.0) == (fm < 0.0)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                double cross = 0.5 * (lo + hi);
                measure += fa < 0.0 ? cross - a : b - cross;
            }
        }
        rep.grid_estimate = measure / (2.0 * eps);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Good-configuration search

GoodConfigResult search_good_configuration(const ModelParams& params, const Configuration& omega0,
                                           const std::array<double, 3>& x, double ell, double epsilon,
                                           Interval window, const GoodConfigOptions& opt) {
    if (!(epsilon > 0.0 && epsilon < 1.0 / 12.0))
        throw PreconditionError("good config: epsilon must lie in (0, 1/12)");
    GoodConfigResult res;
    res.omega_hat = omega0;
    long evals = 0;

    auto dense_at = [&](const Configuration& w) {
        ++evals;
        return assemble(params, w).to_dense();
    };

    Eigen::MatrixXd A0 = dense_at(omega0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es0(A0, Eigen::EigenvaluesOnly);
    std::vector<double> cluster0;
    double gap = kInf;
    for (long i = 0; i < es0.eigenvalues().size(); ++i) {
        double v = es0.eigenvalues()[i];
        if (window.contains(v))
            cluster0.push_back(v);
        else
            gap = std::min(gap, v < window.lo ? window.lo - v : v - window.hi);
    }
    const long n = static_cast<long>(cluster0.size());
    res.n = n;
    res.seed_spacing = spac_in(A0, window);
    res.achieved_spacing = res.seed_spacing;
    res.evals = evals;
    if (n <= 1) {
        res.complete = true;  // nothing to split
        return res;
    }

    // distance from the cluster to the rest of the spectrum (not just to the
    // window edges)
    gap = kInf;
    for (long i = 0; i < es0.eigenvalues().size(); ++i) {
        double v = es0.eigenvalues()[i];
        if (window.contains(v)) continue;
        gap = std::min(gap, std::min(std::abs(v - cluster0.front()), std::abs(v - cluster0.back())));
    }
    if (gap < 8.0 * epsilon)
        throw PreconditionError("good config: surrounding gap below 8 epsilon at omega0");
    Thresholds th = params.thresholds();
    const double xi = th.xi(params.L, ell, static_cast<double>(n), opt.r, opt.m);
    if (cluster0.back() > xi)
        throw PreconditionError("good config: cluster is not below the xi threshold");

    const double dd = 2.0 * params.d + 2.0 * opt.r;
    res.reference_bound = 8.0 * epsilon * std::pow(ell, -static_cast<double>(n - 1) * dd);
    const double shrink = std::pow(ell, -dd);

    // couplings inside Lambda_ell(x)
    std::vector<std::size_t> search_idx;
    for (std::size_t i = 0; i < omega0.indices.size(); ++i) {
        bool in = true;
        for (int c = 0; c < params.d; ++c)
            if (std::abs(omega0.indices[i][c] - x[c]) > ell / 2.0) in = false;
        if (in) search_idx.push_back(i);
    }
    if (search_idx.empty()) throw PreconditionError("good config: no couplings inside Lambda_ell(x)");

    // per-coupling diagonal weights on the grid nodes
    SparseSymOperator A0op = assemble(params, omega0);
    const long nn = A0op.n;
    std::vector<Eigen::VectorXd> vk(search_idx.size());
    for (std::size_t s = 0; s < search_idx.size(); ++s) {
        vk[s].resize(nn);
        for (long i = 0; i < nn; ++i)
            vk[s][i] = params.bump.translated(A0op.node[i].data(), omega0.indices[search_idx[s]], params.d);
    }

    // tracked interval around the seed cluster
    const Interval track{cluster0.front() - 2.0 * epsilon, cluster0.back() + 2.0 * epsilon};

    Configuration w = omega0;
    double radius = epsilon;

    struct Block {
        long b, e;  // index range within the tracked eigenvalue list
    };
    std::deque<Block> blocks{{0, n}};
    std::vector<Block> done;

    auto window_eigs = [&](const Configuration& cfg, Eigen::MatrixXd* vecs) {
        Eigen::MatrixXd M = dense_at(cfg);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, vecs ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
        std::vector<double> vals;
        std::vector<long> idx;
        for (long i = 0; i < es.eigenvalues().size(); ++i)
            if (track.contains(es.eigenvalues()[i])) {
                vals.push_back(es.eigenvalues()[i]);
                idx.push_back(i);
            }
        if (vecs) {
            vecs->resize(M.rows(), static_cast<long>(idx.size()));
            for (std::size_t c = 0; c < idx.size(); ++c) vecs->col(static_cast<long>(c)) = es.eigenvectors().col(idx[c]);
        }
        return vals;
    };

    while (!blocks.empty() && evals < opt.eval_budget) {
        Block blk = blocks.front();
        blocks.pop_front();
        if (blk.e - blk.b <= 1) {
            done.push_back(blk);
            continue;
        }
        Eigen::MatrixXd vecs;
        std::vector<double> vals = window_eigs(w, &vecs);
        if (static_cast<long>(vals.size()) != n) {
            // count drifted out of the tracked window; stop with best effort
            blocks.push_front(blk);
            break;
        }
        Eigen::MatrixXd Q = vecs.middleCols(blk.b, blk.e - blk.b);

        // direction of largest Feynman-Hellmann slope spread on the block
        std::size_t kstar = 0;
        double best_spread = -1.0;
        for (std::size_t s = 0; s < search_idx.size(); ++s) {
            Eigen::MatrixXd Mk = Q.transpose() * vk[s].asDiagonal() * Q;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ek(Mk, Eigen::EigenvaluesOnly);
            double sp = ek.eigenvalues().maxCoeff() - ek.eigenvalues().minCoeff();
            if (sp > best_spread + 1e-15) {
                best_spread = sp;
                kstar = s;
            }
        }
        const std::size_t ki = search_idx[kstar];
        const double center = omega0.values[ki];
        const double lo = std::max(center - epsilon, w.values[ki] - radius);
        const double hi = std::min(center + epsilon, w.values[ki] + radius);

        // deterministic line scan for the best internal minimum gap,
        // baselined at the current value
        double best_val = w.values[ki];
        double best_gap = kInf;
        for (long i = blk.b; i + 1 < blk.e; ++i) best_gap = std::min(best_gap, vals[i + 1] - vals[i]);
        for (int p = 0; p < opt.line_points && evals < opt.eval_budget; ++p) {
            double cand = opt.line_points == 1 ? lo : lo + (hi - lo) * p / (opt.line_points - 1);
            Configuration trial = w;
            trial.values[ki] = cand;
            std::vector<double> tv = window_eigs(trial, nullptr);
            if (static_cast<long>(tv.size()) != n) continue;
            double g = kInf;
            for (long i = blk.b; i + 1 < blk.e; ++i) g = std::min(g, tv[i + 1] - tv[i]);
            if (g > best_gap) {
                best_gap = g;
                best_val = cand;
            }
        }
        w.values[ki] = best_val;
        for (double v : w.values)
            if (v < 0.0 || v > 1.0) w.out_of_support = true;

        // split the block at its largest internal gap
        std::vector<double> vals2 = window_eigs(w, nullptr);
        if (static_cast<long>(vals2.size()) != n) break;
        long split_at = -1;
        double largest = 0.0;
        for (long i = blk.b; i + 1 < blk.e; ++i) {
            double g = vals2[i + 1] - vals2[i];
            if (g > largest) {
                largest = g;
                split_at = i;
            }
        }
        const double next_radius = radius * shrink;
        if (split_at >= 0 && largest > 8.0 * next_radius) {
            radius = next_radius;
            blocks.push_back({blk.b, split_at + 1});
            blocks.push_back({split_at + 1, blk.e});
        } else if (split_at >= 0 && largest > 0.0) {
            // no certified split; accept the partition anyway and carry on
            radius = next_radius;
            blocks.push_back({blk.b, split_at + 1});
            blocks.push_back({split_at + 1, blk.e});
        } else {
            done.push_back(blk);
        }
    }

    res.complete = blocks.empty();
    for (const auto& b : done)
        if (b.e - b.b > 1) res.complete = false;
    std::vector<double> final_vals = window_eigs(w, nullptr);
    double ach = kInf;
    for (std::size_t i = 0; i + 1 < final_vals.size(); ++i) ach = std::min(ach, final_vals[i + 1] - final_vals[i]);
    res.achieved_spacing = final_vals.size() < 2 ? kInf : ach;
    res.omega_hat = w;
    res.evals = evals;
    res.in_cube = true;
    for (std::size_t i = 0; i < w.values.size(); ++i) {
        bool searched = std::find(search_idx.begin(), search_idx.end(), i) != search_idx.end();
        double dv = std::abs(w.values[i] - omega0.values[i]);
        if (searched ? dv > epsilon + 1e-12 : dv != 0.0) res.in_cube = false;
    }
    return res;
}

}  // namespace rsl
