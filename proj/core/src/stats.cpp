#include "kickns/stats.hpp"

#include <algorithm>
#include <cmath>

namespace kickns {

ProbabilityEstimate wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
    ProbabilityEstimate out;
    out.successes = successes;
    out.trials = trials;
    if (trials == 0) return out;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
    out.estimate = p;
    out.lower = successes == 0 ? 0.0 : std::max(0.0, centre - half);
    out.upper = successes == trials ? 1.0 : std::min(1.0, centre + half);
    return out;
}

MeanEstimate mean_estimate(std::span<const double> samples) {
    MeanEstimate out;
    out.count = samples.size();
    if (samples.empty()) return out;
    const double x0 = samples.front();
    double s = 0.0;
    for (double x : samples) s += x - x0;
    const double shift = s / static_cast<double>(samples.size());
    out.mean = x0 + shift;
    if (samples.size() < 2) return out;
    double ss = 0.0;
    for (double x : samples) {
        const double dev = (x - x0) - shift;
        ss += dev * dev;
    }
    const double n = static_cast<double>(samples.size());
    out.standard_error = std::sqrt(ss / (n - 1.0) / n);
    return out;
}

double kolmogorov_survival(double x) {
    if (x < 0.2) return 1.0;  // the series is slow here and the tail is 1 to double precision
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        s += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

double kolmogorov_critical(double alpha) {
    double lo = 0.2, hi = 5.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (kolmogorov_survival(mid) > alpha) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    if (a.empty() || b.empty()) return {};
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return KsResult{d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

}  // namespace kickns
