#include "doctest.h"

#include <Eigen/Dense>
#include <random>

#include "rsl/ldlt.hpp"
#include "support.hpp"

using namespace rsl;

TEST_CASE("inertia of small hand matrices") {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(4, 4);
    D.diagonal() << -3.0, -1.0, 0.0, 2.0;
    BunchKaufmanLDLT f(D);
    Inertia in = f.inertia(1e-12);
    CHECK(in.n_neg == 2);
    CHECK(in.n_zero == 1);
    CHECK(in.n_pos == 1);
    CHECK(in.total() == 4);
}

TEST_CASE("inertia matches dense eigendecomposition on random matrices") {
    std::mt19937_64 eng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const long n = 1 + static_cast<long>(testsup::u01(eng) * 40);
        Eigen::MatrixXd A = testsup::random_symmetric(n, eng);
        const double shift = 2.0 * (testsup::u01(eng) - 0.5) * 3.0;
        Eigen::MatrixXd M = A;
        M.diagonal().array() -= shift;
        BunchKaufmanLDLT f(M);
        Inertia in = f.inertia(1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
        long neg = 0, pos = 0;
        for (long i = 0; i < n; ++i) {
            if (es.eigenvalues()[i] < shift) ++neg;
            if (es.eigenvalues()[i] > shift) ++pos;
        }
        CHECK(in.n_neg == neg);
        CHECK(in.n_pos == pos);
        CHECK(in.total() == n);
    }
}

TEST_CASE("solver accuracy on indefinite systems") {
    std::mt19937_64 eng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const long n = 2 + static_cast<long>(testsup::u01(eng) * 60);
        Eigen::MatrixXd A = testsup::random_symmetric(n, eng);
        Eigen::VectorXd x(n);
        for (long i = 0; i < n; ++i) x[i] = testsup::gauss(eng);
        Eigen::VectorXd b = A * x;
        BunchKaufmanLDLT f(A);
        Eigen::VectorXd xs = f.solve(b);
        CHECK((xs - x).norm() <= 1e-8 * std::max(1.0, x.norm()));
    }
}

TEST_CASE("multiple right-hand sides") {
    std::mt19937_64 eng(11);
    Eigen::MatrixXd A = testsup::random_symmetric(30, eng);
    Eigen::MatrixXd B(30, 4);
    for (long i = 0; i < 30; ++i)
        for (long j = 0; j < 4; ++j) B(i, j) = testsup::gauss(eng);
    BunchKaufmanLDLT f(A);
    Eigen::MatrixXd X = f.solve(B);
    CHECK((A * X - B).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("exactly singular matrices are detected") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
    A(0, 0) = 1.0;
    A(1, 1) = -2.0;  // third row/column zero
    BunchKaufmanLDLT f(A);
    Inertia in = f.inertia(1e-14);
    CHECK(in.n_zero == 1);
    CHECK(in.n_pos == 1);
    CHECK(in.n_neg == 1);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(f.solve(b), SolverError);
}

TEST_CASE("near-zero pivots are classified by the tolerance") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
    A(0, 0) = 1.0;
    A(1, 1) = 1e-15;
    BunchKaufmanLDLT f(A);
    CHECK(f.inertia(1e-12).n_zero == 1);
    CHECK(f.inertia(1e-16).n_zero == 0);
}

TEST_CASE("sturm tridiagonal inertia agrees with Bunch-Kaufman") {
    std::mt19937_64 eng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const long n = 2 + static_cast<long>(testsup::u01(eng) * 50);
        std::vector<double> d(n), e(n - 1);
        for (auto& v : d) v = 4.0 * (testsup::u01(eng) - 0.5);
        for (auto& v : e) v = 2.0 * (testsup::u01(eng) - 0.5);
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
        for (long i = 0; i < n; ++i) M(i, i) = d[i];
        for (long i = 0; i + 1 < n; ++i) M(i, i + 1) = M(i + 1, i) = e[i];
        const double shift = 3.0 * (testsup::u01(eng) - 0.5);
        Inertia is = tridiag_inertia(d, e, shift, 1e-13);
        Eigen::MatrixXd Ms = M;
        Ms.diagonal().array() -= shift;
        Inertia ib = BunchKaufmanLDLT(Ms).inertia(1e-13);
        CHECK(is.n_neg == ib.n_neg);
        CHECK(is.n_pos == ib.n_pos);
    }
}

TEST_CASE("min block eigenvalue reflects the distance to singularity") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
    A.diagonal() << 5.0, -2.0, 1e-7;
    BunchKaufmanLDLT f(A);
    CHECK(f.min_block_eig() == doctest::Approx(1e-7));
}
