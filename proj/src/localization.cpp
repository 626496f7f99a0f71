#include "rsl/localization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "rsl/spectral.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rsl {

namespace {

GridIndex cell_of(const std::array<double, 3>& u, int d) {
    GridIndex y{0, 0, 0};
    for (int c = 0; c < d; ++c) y[c] = static_cast<int>(std::floor(u[c] + 0.5));
    return y;
}

std::vector<long> cell_nodes(const SparseSymOperator& A, const GridIndex& y) {
    std::vector<long> nodes;
    for (long i = 0; i < A.n; ++i)
        if (cell_of(A.node[i], A.d) == y) nodes.push_back(i);
    return nodes;
}

}  // namespace

EigenfunctionProfile local_norms(const Eigen::VectorXd& psi, const SparseSymOperator& A) {
    if (psi.size() != A.n) throw PreconditionError("local_norms: vector/operator size mismatch");
    const double nrm = psi.norm();
    if (std::abs(nrm - 1.0) > 1e-10)
        throw PreconditionError("local_norms: input not normalized, ||psi|| = " + std::to_string(nrm));
    std::map<GridIndex, double> acc;  // lexicographic by std::array operator<
    for (long i = 0; i < A.n; ++i) acc[cell_of(A.node[i], A.d)] += psi[i] * psi[i];
    EigenfunctionProfile p;
    p.d = A.d;
    for (const auto& [y, m2] : acc) {
        p.cells.push_back(y);
        p.mass.push_back(std::sqrt(m2));
    }
    return p;
}

GridIndex localization_center(const EigenfunctionProfile& profile, bool* tie) {
    if (profile.cells.empty()) throw PreconditionError("localization_center: empty profile");
    std::size_t best = 0;
    bool tied = false;
    for (std::size_t i = 1; i < profile.cells.size(); ++i) {
        if (profile.mass[i] > profile.mass[best]) {
            best = i;
            tied = false;
        } else if (profile.mass[i] == profile.mass[best]) {
            tied = true;  // cells are lexicographic, so `best` stays the smallest
        }
    }
    if (tie) *tie = tied;
    return profile.cells[best];
}

DecayFit decay_rate_fit(const EigenfunctionProfile& profile) {
    DecayFit fit;
    GridIndex center = localization_center(profile);
    std::vector<double> dist, logmass;
    for (std::size_t i = 0; i < profile.cells.size(); ++i) {
        if (profile.mass[i] <= kMassFloor) continue;
        dist.push_back(static_cast<double>(sup_dist(profile.cells[i], center, profile.d)));
        logmass.push_back(std::log(profile.mass[i]));
    }
    fit.cells_used = dist.size();
    if (dist.size() < 4) return fit;
    LinearFit lf = linear_fit(dist, logmass);
    fit.m_prime = -lf.slope;
    fit.r_squared = lf.r_squared;
    fit.sufficient = true;
    return fit;
}

double fractional_moment_sample(const SparseSymOperator& A, double E, double s, const GridIndex& x,
                                const GridIndex& y) {
    if (!(s > 0.0 && s < 1.0)) throw PreconditionError("fractional moment: s must lie in (0, 1)");
    auto X = cell_nodes(A, x);
    auto Y = cell_nodes(A, y);
    if (X.empty() || Y.empty()) throw PreconditionError("fractional moment: cell holds no grid nodes");
    return std::pow(resolvent_block_norm(A, E, X, Y), s);
}

FractionalMomentTable fractional_moment_probe(const ModelParams& params, double E, double s,
                                              const std::vector<std::pair<GridIndex, GridIndex>>& pairs,
                                              long n_samples, std::uint64_t seed, int workers) {
    if (!(s > 0.0 && s < 1.0)) throw PreconditionError("fractional moment: s must lie in (0, 1)");
    if (pairs.empty()) throw PreconditionError("fractional moment: no pairs");
    params.validate();
    auto lattice = params.lattice();

    const std::size_t P = pairs.size();
    std::vector<std::vector<double>> value(static_cast<std::size_t>(n_samples),
                                           std::vector<double>(P, 0.0));
    std::vector<long> rejects(static_cast<std::size_t>(n_samples), 0);

    auto run_sample = [&](long i) {
        long rej = 0;
        for (long attempt = 0; attempt < 100; ++attempt) {
            std::uint64_t si = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(i)),
                                           static_cast<std::uint64_t>(attempt));
            Configuration omega = sample_configuration(params.density, lattice, si);
            SparseSymOperator A = assemble(params, omega);
            try {
                for (std::size_t p = 0; p < P; ++p)
                    value[i][p] = fractional_moment_sample(A, E, s, pairs[p].first, pairs[p].second);
                rejects[i] = rej;
                return;
            } catch (const SolverError&) {
                ++rej;  // E within tolerance of this sample's spectrum; redraw
            }
        }
        rejects[i] = rej;
        for (std::size_t p = 0; p < P; ++p) value[i][p] = -1.0;  // all attempts rejected
    };

    if (workers != 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(workers > 0 ? workers : omp_get_max_threads())
#endif
        for (long i = 0; i < n_samples; ++i) run_sample(i);
    } else {
        for (long i = 0; i < n_samples; ++i) run_sample(i);
    }

    // merge pairs sharing the same sup distance
    std::map<long, RunningStats> by_dist;
    std::map<long, long> rej_by_dist;
    long total_rej = 0;
    for (long i = 0; i < n_samples; ++i) total_rej += rejects[i];
    for (std::size_t p = 0; p < P; ++p) {
        long dist = sup_dist(pairs[p].first, pairs[p].second, params.d);
        for (long i = 0; i < n_samples; ++i)
            if (value[i][p] >= 0.0) by_dist[dist].add(value[i][p]);
        rej_by_dist[dist] = total_rej;
    }

    FractionalMomentTable t;
    t.s = s;
    t.E = E;
    t.total_rejections = total_rej;
    std::vector<double> fit_x, fit_y;
    for (const auto& [dist, rs] : by_dist) {
        t.distance.push_back(static_cast<double>(dist));
        t.mean.push_back(rs.mean());
        t.se.push_back(rs.stderr_mean());
        t.n.push_back(rs.n);
        t.rejections.push_back(rej_by_dist[dist]);
        if (rs.mean() > 0.0) {
            fit_x.push_back(static_cast<double>(dist));
            fit_y.push_back(std::log(rs.mean()));
        }
    }
    if (fit_x.size() >= 2) {
        LinearFit lf = linear_fit(fit_x, fit_y);
        t.fitted_m = -lf.slope;
        t.fitted_C = std::exp(lf.intercept);
        t.r_squared = lf.r_squared;
    }
    t.unreliable = total_rej > n_samples / 2;
    return t;
}

void write_decay_csv(const std::string& path, const FractionalMomentTable& table) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    os << "distance,mean,stderr,n,rejections\n";
    char buf[192];
    for (std::size_t i = 0; i < table.distance.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%ld,%ld\n", table.distance[i], table.mean[i],
                      table.se[i], table.n[i], table.rejections[i]);
        os << buf;
    }
}

}  // namespace rsl
