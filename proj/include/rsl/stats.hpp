#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rsl {

struct WilsonInterval {
    double p_hat = 0.0;
    double lo = 0.0;
    double hi = 1.0;
    long successes = 0;
    long n = 0;
};

/// Wilson score interval at confidence z (default 95%).
WilsonInterval wilson_interval(long successes, long n, double z = 1.959963984540054);

/// Upper regularized incomplete gamma Q(a, x); chi-square upper tail is
/// Q(dof/2, x/2).
double gamma_q(double a, double x);

double chi2_tail(double chi2, long dof);

struct KsResult {
    double distance = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    std::string method;
};

/// One-sample KS against Exponential(rate). p-value from the asymptotic
/// Kolmogorov series with the Stephens small-sample correction.
KsResult ks_test_exponential(std::vector<double> sample, double rate);

struct Chi2Result {
    double statistic = 0.0;
    double p_value = 1.0;
    long dof = 0;
    std::size_t n = 0;
    std::string method;
};

/// Goodness of fit of integer counts against Poisson(mean); tail bins are
/// merged until every expected count is at least 5.
Chi2Result chi2_poisson_test(const std::vector<long>& counts, double mean);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct RunningStats {
    double sum = 0.0;
    double sum_sq = 0.0;
    long n = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    void merge(const RunningStats& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        n += o.n;
    }
    double mean() const { return n ? sum / n : 0.0; }
    double variance() const;
    double stderr_mean() const;
};

}  // namespace rsl
