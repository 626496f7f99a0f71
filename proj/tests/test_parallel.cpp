#include "doctest.h"

#include <Eigen/Dense>

#include "rsl/cluster.hpp"
#include "rsl/harness.hpp"
#include "rsl/localization.hpp"
#include "rsl/probes.hpp"
#include "support.hpp"

using namespace rsl;

// The OpenMP kernels must agree with their serial reference paths exactly:
// per-sample work is seeded independently of the schedule and reductions run
// over index-ordered buffers.

TEST_CASE("ensemble pool matches the serial reference byte for byte") {
    ExperimentConfig cfg;
    cfg.model.L = 8;
    cfg.model.h = 0.25;
    cfg.probe = "spacing_tail";
    cfg.n_samples = 32;
    cfg.master_seed = 97;
    cfg.workers = 4;

    auto serial = execute_samples_serial(cfg);
    auto parallel = execute_samples_parallel(cfg);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i].to_line() == parallel[i].to_line());
}

TEST_CASE("cartan Monte Carlo is schedule independent") {
    ParamFamily fam;
    fam.A = Eigen::MatrixXd::Zero(3, 3);
    fam.A(2, 2) = 10.0;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 3);
    B.diagonal() << 1.0, -1.0, 0.0;
    fam.directions.push_back(B);
    fam.epsilon = 1.0 / 13.0;
    ClusterWindow win{{-0.01, 0.01}, 1.0 / 13.0, 0};
    win.validate_against(fam.A);

    CartanOptions serial_opt;
    serial_opt.n_draws = 4000;
    serial_opt.seed = 5;
    serial_opt.workers = 1;
    CartanOptions par_opt = serial_opt;
    par_opt.workers = 4;

    CartanReport a = cartan_sublevel_measure(fam, win, 0.02, serial_opt);
    CartanReport b = cartan_sublevel_measure(fam, win, 0.02, par_opt);
    CHECK(a.hits == b.hits);
    CHECK(a.mc_estimate == b.mc_estimate);
}

TEST_CASE("flatness s-grid scan is schedule independent") {
    std::mt19937_64 eng(77);
    Eigen::VectorXd eigs(6);
    eigs << 0.0, 0.01, 0.02, 2.0, 3.0, 4.0;
    ParamFamily fam{testsup::with_spectrum(eigs, eng), {testsup::random_contraction_psd(6, eng)},
                    1.0 / 13.0};
    ClusterWindow win{{-0.001, 0.021}, 1.0 / 13.0, 0};
    win.validate_against(fam.A);
    FlatnessReport a = cluster_flatness(fam, win, 0, 41, 1);
    FlatnessReport b = cluster_flatness(fam, win, 0, 41, 4);
    CHECK(a.delta == b.delta);
    CHECK(a.sup_norm == b.sup_norm);
}

TEST_CASE("fractional moment probe is schedule independent") {
    ModelParams p;
    p.L = 8;
    p.h = 0.5;
    p.mu = 0.1;
    std::vector<std::pair<GridIndex, GridIndex>> pairs = {{{-2, 0, 0}, {-2, 0, 0}},
                                                          {{-2, 0, 0}, {0, 0, 0}}};
    FractionalMomentTable a = fractional_moment_probe(p, -0.2, 0.5, pairs, 64, 31, 1);
    FractionalMomentTable b = fractional_moment_probe(p, -0.2, 0.5, pairs, 64, 31, 4);
    CHECK(a.mean == b.mean);
    CHECK(a.se == b.se);
    CHECK(a.rejections == b.rejections);
}
