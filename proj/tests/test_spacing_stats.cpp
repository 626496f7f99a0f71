#include "doctest.h"

#include <cmath>
#include <random>

#include "rsl/spacing_stats.hpp"
#include "rsl/stats.hpp"
#include "support.hpp"

using namespace rsl;

namespace {

Spectrum make_spec(std::vector<double> ev) {
    Spectrum s;
    std::sort(ev.begin(), ev.end());
    s.eigenvalues = std::move(ev);
    s.cutoff = kInf;
    return s;
}

}  // namespace

TEST_CASE("spacing basics") {
    CHECK(spacing(make_spec({1.0, 1.5, 1.6, 3.0}), {0.0, 2.0}) == doctest::Approx(0.1));
    CHECK(spacing(make_spec({1.0}), {0.0, 2.0}) == kInf);
    CHECK(spacing(make_spec({1.0, 1.0, 2.0}), {0.0, 3.0}) == 0.0);
    CHECK(spacing(make_spec({}), {0.0, 1.0}) == kInf);
}

TEST_CASE("spacing properties: nonnegative and translation invariant") {
    // dyadic eigenvalues and shifts keep the additions exact
    std::mt19937_64 eng(1);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> ev;
        for (int i = 0; i < 12; ++i) ev.push_back(std::floor(256.0 * testsup::u01(eng)) / 64.0);
        Spectrum s = make_spec(ev);
        Interval I{1.0, 3.0};
        const double sp = spacing(s, I);
        CHECK(sp >= 0.0);
        const double tau = std::floor(64.0 * testsup::u01(eng)) / 64.0 - 0.5;
        std::vector<double> shifted;
        for (double v : s.eigenvalues) shifted.push_back(v + tau);
        CHECK(spacing(make_spec(shifted), I.shifted(tau)) == sp);
    }
}

TEST_CASE("discriminant") {
    CHECK(discriminant(make_spec({1.0, 2.0, 4.0}), {-kInf, kInf}) == doctest::Approx(36.0));
    CHECK(discriminant(make_spec({0.5, 0.7}), {-kInf, kInf}) == doctest::Approx(0.04));
    CHECK(discriminant(make_spec({1.0, 1.0, 3.0}), {-kInf, kInf}) == 0.0);
    CHECK_THROWS_AS(discriminant(make_spec({1.0}), {-kInf, kInf}), PreconditionError);

    SUBCASE("zero discriminant iff zero spacing") {
        std::mt19937_64 eng(3);
        for (int t = 0; t < 50; ++t) {
            std::vector<double> ev;
            for (int i = 0; i < 6; ++i) ev.push_back(std::round(8.0 * testsup::u01(eng)) / 4.0);
            Spectrum s = make_spec(ev);
            const bool zero_disc = discriminant(s, {-kInf, kInf}) == 0.0;
            const bool zero_spac = spacing(s, {-kInf, kInf}) == 0.0;
            CHECK(zero_disc == zero_spac);
        }
    }

    SUBCASE("gaps below one keep the discriminant at most one") {
        std::mt19937_64 eng(4);
        for (int t = 0; t < 50; ++t) {
            std::vector<double> ev;
            double base = testsup::u01(eng);
            for (int i = 0; i < 5; ++i) ev.push_back(base + 0.4 * testsup::u01(eng));
            CHECK(discriminant(make_spec(ev), {-kInf, kInf}) <= 1.0);
        }
    }
}

TEST_CASE("find_clusters greedy 6-epsilon rule") {
    Spectrum s = make_spec({0.10, 0.11, 0.50});
    ClusterDecomposition dec = find_clusters(s, 0.02, 1.0);
    REQUIRE(dec.clusters.size() == 2);
    CHECK(dec.clusters[0].begin == 0);
    CHECK(dec.clusters[0].end == 2);
    CHECK(dec.clusters[1].begin == 2);
    CHECK(dec.clusters[0].gap_above == doctest::Approx(0.39));

    SUBCASE("one chained cluster") {
        Spectrum t = make_spec({0.0, 0.1, 0.2, 0.3});
        ClusterDecomposition d2 = find_clusters(t, 0.02, 1.0);
        CHECK(d2.clusters.size() == 1);
    }

    SUBCASE("empty spectrum") {
        CHECK(find_clusters(make_spec({}), 0.02, 1.0).clusters.empty());
    }

    SUBCASE("gap structure invariant on random spectra") {
        std::mt19937_64 eng(5);
        for (int t = 0; t < 30; ++t) {
            std::vector<double> ev;
            for (int i = 0; i < 25; ++i) ev.push_back(5.0 * testsup::u01(eng));
            const double eps = 0.01 + 0.01 * testsup::u01(eng);
            Spectrum s2 = make_spec(ev);
            ClusterDecomposition dec2 = find_clusters(s2, eps, 6.0);
            std::size_t covered = 0;
            for (const auto& c : dec2.clusters) {
                covered += c.end - c.begin;
                for (std::size_t i = c.begin; i + 1 < c.end; ++i)
                    CHECK(s2.eigenvalues[i + 1] - s2.eigenvalues[i] <= 6.0 * eps);
            }
            CHECK(covered == ev.size());
            for (std::size_t c = 0; c + 1 < dec2.clusters.size(); ++c)
                CHECK(dec2.clusters[c].gap_above > 6.0 * eps);
        }
    }
}

TEST_CASE("central energy") {
    Spectrum s = make_spec({1.0, 2.0, 3.0});
    ClusterDecomposition::Cluster c{0, 3, {1.0, 3.0}, kInf, kInf};
    CHECK(central_energy(s, c) == doctest::Approx(2.0));
    ClusterDecomposition::Cluster single{2, 3, {3.0, 3.0}, kInf, kInf};
    CHECK(central_energy(s, single) == doctest::Approx(3.0));
    Spectrum m = make_spec({1.0, 1.0, 4.0});
    ClusterDecomposition::Cluster all{0, 3, {1.0, 4.0}, kInf, kInf};
    CHECK(central_energy(m, all) == doctest::Approx(2.0));
    ClusterDecomposition::Cluster empty{1, 1, {0.0, 0.0}, kInf, kInf};
    CHECK_THROWS_AS(central_energy(s, empty), PreconditionError);
}

TEST_CASE("unfolded counts") {
    Spectrum s = make_spec({0.50, 0.52, 0.60});
    CHECK(unfolded_counts(s, 0.5, 100.0, 1, {0.0, 3.0}) == 2);
    CHECK(unfolded_counts(s, 0.5, 100.0, 1, {3.0, 0.0}) == 0);  // empty B

    SUBCASE("additive over disjoint windows") {
        std::mt19937_64 eng(6);
        for (int t = 0; t < 30; ++t) {
            std::vector<double> ev;
            for (int i = 0; i < 20; ++i) ev.push_back(testsup::u01(eng));
            Spectrum s2 = make_spec(ev);
            const double E = 0.5, L = 3.0;
            Interval B1{-2.0, 0.7}, B2{std::nextafter(0.7, 2.0), 2.0};
            CHECK(unfolded_counts(s2, E, L, 1, B1) + unfolded_counts(s2, E, L, 1, B2) ==
                  unfolded_counts(s2, E, L, 1, {-2.0, 2.0}));
        }
    }
}

TEST_CASE("ids and dos tables") {
    SUBCASE("single spectrum count over volume") {
        std::vector<Spectrum> ens = {make_spec({1.0, 2.0})};
        IdsTable t = ids_table(ens, std::sqrt(2.0), 2, {0.5, 1.5, 2.5});  // L^d = 2
        CHECK(t.N[0] == doctest::Approx(0.0));
        CHECK(t.N[1] == doctest::Approx(0.5));
        CHECK(t.N[2] == doctest::Approx(1.0));
    }

    SUBCASE("N is nondecreasing and matches raw counts") {
        std::mt19937_64 eng(7);
        std::vector<Spectrum> ens;
        for (int i = 0; i < 12; ++i) {
            std::vector<double> ev;
            for (int j = 0; j < 15; ++j) ev.push_back(3.0 * testsup::u01(eng));
            ens.push_back(make_spec(ev));
        }
        std::vector<double> grid;
        for (int g = 0; g <= 10; ++g) grid.push_back(0.3 * g);
        IdsTable t = ids_table(ens, 2.0, 1, grid);
        for (std::size_t g = 1; g < t.N.size(); ++g) CHECK(t.N[g] >= t.N[g - 1]);
        // N * L^d * n_samples stays an integer
        for (std::size_t g = 0; g < t.N.size(); ++g) {
            const double total = t.N[g] * 2.0 * 12.0;
            CHECK(total == doctest::Approx(std::round(total)).epsilon(1e-12));
        }
    }

    SUBCASE("central differences recover a linear IDS exactly") {
        IdsTable ids;
        for (int g = 0; g <= 8; ++g) {
            ids.energy.push_back(0.25 * g);
            ids.N.push_back(0.25 * g);  // N(E) = E
            ids.N_stderr.push_back(0.0);
        }
        DosTable dos = dos_from_ids(ids);
        for (double v : dos.n) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("too-short grids are rejected for the density") {
        IdsTable ids;
        ids.energy = {0.0, 1.0};
        ids.N = {0.0, 1.0};
        ids.N_stderr = {0.0, 0.0};
        CHECK_THROWS_AS(dos_from_ids(ids), PreconditionError);
    }
}

TEST_CASE("statistical helpers") {
    SUBCASE("wilson interval matches the hand-computed example") {
        WilsonInterval w = wilson_interval(3, 10);
        CHECK(w.p_hat == doctest::Approx(0.3));
        CHECK(w.lo == doctest::Approx(0.108).epsilon(5e-3));
        CHECK(w.hi == doctest::Approx(0.603).epsilon(5e-3));
    }

    SUBCASE("chi-square tail sanity") {
        CHECK(chi2_tail(0.0, 5) == doctest::Approx(1.0));
        // median of chi2 with one degree of freedom
        CHECK(chi2_tail(0.4549, 1) == doctest::Approx(0.5).epsilon(2e-3));
        CHECK(chi2_tail(100.0, 5) < 1e-12);
    }
}

TEST_CASE("poisson goodness-of-fit tests") {
    SUBCASE("synthetic Poisson counts pass the chi-square test") {
        std::mt19937_64 eng(8);
        std::vector<long> counts;
        const double lam = 2.0;
        for (int i = 0; i < 10000; ++i) {
            long k = 0;
            double p = std::exp(-lam), F = p, u = testsup::u01(eng);
            while (u > F && k < 100) {
                ++k;
                p *= lam / k;
                F += p;
            }
            counts.push_back(k);
        }
        std::vector<double> spac;
        for (int i = 0; i < 100; ++i) spac.push_back(0.1 * (i + 1));
        PoissonTestReport rep = poisson_tests(counts, spac, 2.0, 1.0);
        REQUIRE(rep.sufficient);
        CHECK(rep.chi2.p_value > 0.01);
    }

    SUBCASE("synthetic exponential spacings pass the KS test") {
        std::mt19937_64 eng(9);
        std::vector<double> spac;
        for (int i = 0; i < 10000; ++i) spac.push_back(-std::log(1.0 - testsup::u01(eng)));
        std::vector<long> counts(100, 1);
        PoissonTestReport rep = poisson_tests(counts, spac, 1.0, 1.0);
        REQUIRE(rep.sufficient);
        CHECK(rep.ks.p_value > 0.01);
    }

    SUBCASE("a point mass is rejected with the exact KS distance") {
        std::vector<double> spac(1000, 1.0);
        KsResult ks = ks_test_exponential(spac, 1.0);
        CHECK(ks.distance == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-3));
        CHECK(ks.p_value < 1e-6);
    }

    SUBCASE("too few samples yield an insufficiency result") {
        PoissonTestReport rep = poisson_tests({1, 2}, {0.5}, 1.0, 1.0);
        CHECK_FALSE(rep.sufficient);
    }

    SUBCASE("nonpositive intensity is rejected") {
        CHECK_THROWS_AS(poisson_tests({1}, {0.5}, 0.0, 1.0), PreconditionError);
    }
}

TEST_CASE("histogram covers samples") {
    std::vector<double> samples = {0.1, 0.2, 0.25, 0.9};
    auto rows = histogram(samples, 0.0, 1.0, 4);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].count == 2);
    CHECK(rows[1].count == 1);
    CHECK(rows[3].count == 1);
    long total = 0;
    for (const auto& r : rows) total += r.count;
    CHECK(total == 4);
}
