#include "rsl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsl {

WilsonInterval wilson_interval(long successes, long n, double z) {
    WilsonInterval w;
    w.successes = successes;
    w.n = n;
    if (n <= 0) return w;
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    w.p_hat = p;
    w.lo = std::max(0.0, center - half);
    w.hi = std::min(1.0, center + half);
    return w;
}

namespace {

// series expansion of P(a,x), and continued fraction of Q(a,x)
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: need x >= 0, a > 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_contfrac(a, x);
}

double chi2_tail(double chi2, long dof) {
    if (dof <= 0) return 1.0;
    return gamma_q(0.5 * dof, 0.5 * chi2);
}

KsResult ks_test_exponential(std::vector<double> sample, double rate) {
    KsResult r;
    r.n = sample.size();
    r.method =
        "D = sup|F_n - F|, F(x) = 1 - exp(-rate x); "
        "p = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2), lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) D";
    if (sample.empty()) return r;
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double dmax = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = 1.0 - std::exp(-rate * sample[i]);
        dmax = std::max(dmax, std::max((i + 1) / n - f, f - i / n));
    }
    r.distance = dmax;
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * dmax;
    double p = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
        p += term;
        if (std::abs(term) < 1e-12) break;
    }
    r.p_value = std::clamp(p, 0.0, 1.0);
    return r;
}

Chi2Result chi2_poisson_test(const std::vector<long>& counts, double mean) {
    Chi2Result r;
    r.n = counts.size();
    r.method = "Poisson pmf bins, tail-merged to expected >= 5; p = Q(dof/2, chi2/2)";
    if (counts.empty() || mean <= 0.0) return r;
    const double n = static_cast<double>(counts.size());
    long kmax = 0;
    for (long c : counts) kmax = std::max(kmax, c);

    // expected bin masses for k = 0..kmax, plus the tail > kmax
    std::vector<double> pmf(static_cast<std::size_t>(kmax) + 1);
    double p0 = std::exp(-mean);
    double cum = 0.0;
    for (long k = 0; k <= kmax; ++k) {
        pmf[k] = p0;
        cum += p0;
        p0 *= mean / (k + 1);
    }
    std::vector<double> expect(pmf.begin(), pmf.end());
    for (double& e : expect) e *= n;
    double tail = n * std::max(0.0, 1.0 - cum);

    std::vector<long> observed(static_cast<std::size_t>(kmax) + 1, 0);
    for (long c : counts) ++observed[c];

    // merge from the right until expected >= 5, folding the analytic tail in
    std::vector<double> e_bins;
    std::vector<long> o_bins;
    double e_acc = tail;
    long o_acc = 0;
    for (long k = kmax; k >= 0; --k) {
        e_acc += expect[k];
        o_acc += observed[k];
        if (e_acc >= 5.0 || k == 0) {
            e_bins.push_back(e_acc);
            o_bins.push_back(o_acc);
            e_acc = 0.0;
            o_acc = 0;
        }
    }
    // leading bin may still be small; merge into its neighbour
    while (e_bins.size() > 1 && e_bins.back() < 5.0) {
        e_bins[e_bins.size() - 2] += e_bins.back();
        o_bins[o_bins.size() - 2] += o_bins.back();
        e_bins.pop_back();
        o_bins.pop_back();
    }
    if (e_bins.size() < 2) {
        r.dof = 0;
        r.p_value = 1.0;
        return r;
    }
    double chi2 = 0.0;
    for (std::size_t b = 0; b < e_bins.size(); ++b) {
        const double d = o_bins[b] - e_bins[b];
        chi2 += d * d / e_bins[b];
    }
    r.statistic = chi2;
    r.dof = static_cast<long>(e_bins.size()) - 1;
    r.p_value = chi2_tail(chi2, r.dof);
    return r;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    LinearFit f;
    f.n = x.size();
    if (x.size() != y.size() || x.size() < 2) return f;
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double vxx = sxx - sx * sx / n;
    const double vxy = sxy - sx * sy / n;
    const double vyy = syy - sy * sy / n;
    if (vxx <= 0.0) return f;
    f.slope = vxy / vxx;
    f.intercept = (sy - f.slope * sx) / n;
    f.r_squared = vyy > 0.0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
    return f;
}

double RunningStats::variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sum_sq - n * m * m) / (n - 1));
}

double RunningStats::stderr_mean() const { return n ? std::sqrt(variance() / n) : 0.0; }

}  // namespace rsl
