#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace kickns {

/// Bernoulli frequency with a Wilson score interval.
struct ProbabilityEstimate {
    std::uint64_t successes = 0;
    std::uint64_t trials = 0;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 1.0;
};

ProbabilityEstimate wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.96);

struct MeanEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t count = 0;
};

/// Sample mean and standard error of the mean. The mean is accumulated
/// relative to the first sample so a constant sample returns it exactly.
MeanEstimate mean_estimate(std::span<const double> samples);

/// Asymptotic Kolmogorov distribution: P(K > x) = 2 sum (-1)^{k-1} exp(-2 k^2 x^2).
double kolmogorov_survival(double x);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// One-sample test against a continuous CDF, with the Stephens finite-n
/// correction sqrt(n) + 0.12 + 0.11/sqrt(n).
template <typename Cdf>
KsResult ks_one_sample(std::vector<double> samples, Cdf&& cdf);

/// Two-sample Kolmogorov-Smirnov test (asymptotic p-value with the
/// effective-size correction).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Critical value of the asymptotic Kolmogorov statistic at level alpha.
double kolmogorov_critical(double alpha);

}  // namespace kickns

#include <algorithm>
#include <cmath>

namespace kickns {

template <typename Cdf>
KsResult ks_one_sample(std::vector<double> samples, Cdf&& cdf) {
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    const double sn = std::sqrt(n);
    return KsResult{d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)};
}

}  // namespace kickns
