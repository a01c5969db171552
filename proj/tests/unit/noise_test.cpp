#include <doctest.h>

#include <kickns/error.hpp>
#include <kickns/noise.hpp>
#include <kickns/stats.hpp>

#include <cmath>
#include <numbers>

using namespace kickns;

namespace {

// Closed-form CDF of rho(x) = (15/16)(1 - x^2)^2.
double quartic_cdf(double x) {
    if (x <= -1.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return 0.5 + 15.0 / 16.0 * (x - 2.0 * x * x * x / 3.0 + x * x * x * x * x / 5.0);
}

double bump(double z, double lo, double hi) {
    const double s = (2.0 * z - lo - hi) / (hi - lo);
    return std::abs(s) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
}

NoiseOptions single_mode(double b) {
    NoiseOptions o;
    o.amplitudes = {b};
    return o;
}

// psi_j by midpoint quadrature on an n^3 grid over the window, gradients by
// central differences.
std::pair<double, double> quadrature_norms(const NoiseModel& m, int j, int n) {
    const Window& w = m.window();
    const double ht = w.duration() / n, hx = w.width() / n, hy = w.height() / n;
    const double e = 1e-6;
    double l2 = 0.0, grad = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                const double t = w.t0 + (a + 0.5) * ht, x = w.x0 + (b + 0.5) * hx, y = w.y0 + (c + 0.5) * hy;
                const double v = m.psi(j, t, x, y);
                const double dt = (m.psi(j, t + e, x, y) - m.psi(j, t - e, x, y)) / (2 * e);
                const double dx = (m.psi(j, t, x + e, y) - m.psi(j, t, x - e, y)) / (2 * e);
                const double dy = (m.psi(j, t, x, y + e) - m.psi(j, t, x, y - e)) / (2 * e);
                l2 += v * v;
                grad += dt * dt + dx * dx + dy * dy;
            }
    const double vol = ht * hx * hy;
    return {std::sqrt(l2 * vol), std::sqrt((l2 + grad) * vol)};
}

}  // namespace

TEST_CASE("truncation constant from an independent quadrature") {
    const NoiseModel m = NoiseModel::build({});
    REQUIRE(m.modes() == 16);
    CHECK(std::isfinite(m.b_trunc()));
    double b_trunc = 0.0, radius = 0.0;
    for (int j = 0; j < m.modes(); ++j) {
        const auto [l2, h1] = quadrature_norms(m, j, 40);
        CHECK(m.l2_norm(j) == doctest::Approx(l2).epsilon(1e-3));
        CHECK(m.h1_norm(j) == doctest::Approx(h1).epsilon(1e-3));
        CHECK(m.amplitude(j) == doctest::Approx(0.1 / ((j + 1.0) * (j + 1.0))));
        b_trunc += m.amplitude(j) * h1;
        radius += m.amplitude(j) * l2;
    }
    CHECK(m.b_trunc() == doctest::Approx(b_trunc).epsilon(1e-3));
    CHECK(m.kick_radius() == doctest::Approx(radius).epsilon(1e-3));
}

TEST_CASE("nondegeneracy and geometry are enforced") {
    NoiseOptions o;
    o.amplitudes[3] = 0.0;
    CHECK_THROWS_AS(NoiseModel::build(o), NondegeneracyError);
    NoiseOptions g;
    g.window.x1 = 1.0;
    CHECK_THROWS_AS(NoiseModel::build(g), GeometryError);
    NoiseOptions t;
    t.window.t0 = 0.8;
    CHECK_THROWS_AS(NoiseModel::build(t), GeometryError);
}

TEST_CASE("mode basis is orthonormal under the quadrature") {
    const NoiseModel m = NoiseModel::build({});
    const Eigen::MatrixXd g = m.l2_gram();
    // The cutoff makes psi_j non-orthogonal; phi_j itself is checked here.
    const Window& w = m.window();
    const int n = 24;
    Eigen::MatrixXd phi_gram = Eigen::MatrixXd::Zero(m.modes(), m.modes());
    const double ht = w.duration() / n, hx = w.width() / n, hy = w.height() / n;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                const double t = w.t0 + (a + 0.5) * ht, x = w.x0 + (b + 0.5) * hx, y = w.y0 + (c + 0.5) * hy;
                for (int j = 0; j < m.modes(); ++j)
                    for (int k = 0; k < m.modes(); ++k)
                        if (m.mode(j).component == m.mode(k).component)
                            phi_gram(j, k) += m.phi(j, t, x, y) * m.phi(k, t, x, y) * ht * hx * hy;
            }
    CHECK((phi_gram - Eigen::MatrixXd::Identity(m.modes(), m.modes())).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("single mode: the kick norm is the quadrature of |chi phi_1|") {
    const NoiseModel m = NoiseModel::build(single_mode(1.0));
    const auto [l2, h1] = quadrature_norms(m, 0, 48);
    CHECK(m.kick_radius() == doctest::Approx(l2).epsilon(1e-4));
    CHECK(m.b_trunc() == doctest::Approx(h1).epsilon(1e-3));
    CHECK(kick_l2_norm(m, KickRealization{Eigen::VectorXd::Constant(1, 1.0)}) == doctest::Approx(m.kick_radius()));
}

TEST_CASE("coefficient sampling") {
    const NoiseModel m = NoiseModel::build({});
    const CoefficientDensity& rho = m.density();
    SUBCASE("analytic density") {
        for (double x = -1.0; x <= 1.0; x += 0.125) CHECK(rho.cdf(x) == doctest::Approx(quartic_cdf(x)).epsilon(1e-14));
        CHECK(rho.variance() == doctest::Approx(1.0 / 7.0));
        for (double u : {1e-6, 0.1, 0.5, 0.77, 1 - 1e-6}) CHECK(std::abs(rho.cdf(rho.quantile(u)) - u) <= 1e-12);
    }
    SUBCASE("mean and support over 1e5 draws") {
        const std::size_t n = 100000;
        double sum = 0.0, top = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            Stream rng(11, i);
            const double x = sample_kick(m, rng).xi[0];
            sum += x;
            top = std::max(top, std::abs(x));
        }
        CHECK(std::abs(sum / n) <= 3.0 * std::sqrt(rho.variance() / n));
        CHECK(top <= 1.0);
    }
    SUBCASE("Kolmogorov-Smirnov at 1% with 1e4 draws") {
        std::vector<double> xs;
        Stream rng(12, 0);
        for (int i = 0; i < 10000; ++i) xs.push_back(sample_kick(m, rng).xi[5]);
        const KsResult ks = ks_one_sample(xs, quartic_cdf);
        CHECK(ks.statistic * std::sqrt(10000.0) < kolmogorov_critical(0.01));
        CHECK(ks.p_value > 0.01);
    }
    SUBCASE("replay") {
        Stream a(13, 4), b(13, 4);
        CHECK(sample_kick(m, a) == sample_kick(m, b));
        Stream c(13, 5);
        CHECK_FALSE(sample_kick(m, a) == sample_kick(m, c));
    }
}

TEST_CASE("kick evaluation") {
    const DomainSpec d = DomainSpec::make(32, 32, 0.05);
    const NoiseModel m = NoiseModel::build({});
    Stream rng(14, 0);
    const KickRealization k = sample_kick(m, rng);
    CHECK(eval_kick(m, k, 0.2, d).is_zero());
    CHECK(eval_kick(m, k, 0.8, d).is_zero());
    CHECK(eval_kick(m, KickRealization::zero(m.modes()), 0.5, d).is_zero());

    const VelocityField f = eval_kick(m, k, 0.43, d);
    const Window& w = m.window();
    for (int i = 0; i <= d.nx; ++i)
        for (int j = 0; j < d.ny; ++j) {
            const double x = i * d.hx(), y = (j + 0.5) * d.hy();
            if (!(x > w.x0 && x < w.x1 && y > w.y0 && y < w.y1)) CHECK(f.u(i, j) == 0.0);
        }
    for (int i = 0; i < d.nx; ++i)
        for (int j = 0; j <= d.ny; ++j) {
            const double x = (i + 0.5) * d.hx(), y = j * d.hy();
            if (!(x > w.x0 && x < w.x1 && y > w.y0 && y < w.y1)) CHECK(f.v(i, j) == 0.0);
        }
}

TEST_CASE("single mode at the window midpoint equals b chi phi") {
    const DomainSpec d = DomainSpec::make(32, 32, 0.05);
    const double b = 0.37;
    const NoiseModel m = NoiseModel::build(single_mode(b));
    const Window& w = m.window();
    const double t = 0.5 * (w.t0 + w.t1);
    const VelocityField f = eval_kick(m, KickRealization{Eigen::VectorXd::Constant(1, 1.0)}, t, d);
    const double pi = std::numbers::pi;
    const double norm = std::sqrt(8.0 / (w.duration() * w.width() * w.height()));
    double worst = 0.0;
    for (int i = 0; i <= d.nx; ++i)
        for (int j = 0; j < d.ny; ++j) {
            const double x = i * d.hx(), y = (j + 0.5) * d.hy();
            const double chi = bump(t, w.t0, w.t1) * bump(x, w.x0, w.x1) * bump(y, w.y0, w.y1);
            const double phi = norm * std::sin(pi * (t - w.t0) / w.duration()) * std::sin(pi * (x - w.x0) / w.width()) *
                               std::sin(pi * (y - w.y0) / w.height());
            worst = std::max(worst, std::abs(f.u(i, j) - b * chi * phi));
        }
    CHECK(worst <= 1e-14);
    CHECK(f.v_values()[0] == 0.0);
    CHECK(std::all_of(f.v_values().begin(), f.v_values().end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("kick radius bounds every realization") {
    const NoiseModel m = NoiseModel::build({});
    for (int i = 0; i < 1000; ++i) {
        Stream rng(15, static_cast<std::uint64_t>(i));
        CHECK(kick_l2_norm(m, sample_kick(m, rng)) <= m.kick_radius() + 1e-10);
    }
    KickRealization corner{Eigen::VectorXd::Ones(m.modes())};
    CHECK(kick_l2_norm(m, corner) <= m.kick_radius() + 1e-10);
    CHECK(m.scaled(2.0).kick_radius() == doctest::Approx(2.0 * m.kick_radius()).epsilon(1e-14));
    CHECK(m.scaled(2.0).b_trunc() == doctest::Approx(2.0 * m.b_trunc()).epsilon(1e-14));
    const NoiseModel one = NoiseModel::build(single_mode(0.3));
    CHECK(one.kick_radius() == doctest::Approx(0.3 * one.l2_norm(0)).epsilon(1e-15));
}

TEST_CASE("small-ball probabilities") {
    const NoiseModel m = NoiseModel::build({});
    const KickRealization zero = KickRealization::zero(m.modes());
    SUBCASE("ball containing the support") {
        const ProbabilityEstimate p = kick_ball_probability(m, {zero}, m.kick_radius() * 1.0001, 500, 1);
        CHECK(p.estimate == 1.0);
    }
    SUBCASE("product over independent periods") {
        const double radius = 0.35 * m.kick_radius();
        const ProbabilityEstimate one = kick_ball_probability(m, {zero}, radius, 20000, 2);
        const ProbabilityEstimate two = kick_ball_probability(m, {zero, zero}, radius, 20000, 3);
        const double p1 = one.estimate, p2 = two.estimate;
        REQUIRE(p1 > 0.05);
        const double se = std::sqrt(p2 * (1 - p2) / 20000.0 + std::pow(2 * p1, 2) * p1 * (1 - p1) / 20000.0);
        CHECK(std::abs(p2 - p1 * p1) <= 3.0 * se);
    }
    SUBCASE("one mode: integral of the density over the coefficient interval") {
        const NoiseModel s = NoiseModel::build(single_mode(0.2));
        const double theta = 0.3, radius = 0.1 * s.kick_radius();
        const double delta = radius / s.kick_radius();
        const double exact = quartic_cdf(theta + delta) - quartic_cdf(theta - delta);
        const ProbabilityEstimate p =
            kick_ball_probability(s, {KickRealization{Eigen::VectorXd::Constant(1, theta)}}, radius, 40000, 4);
        CHECK(std::abs(p.estimate - exact) <= 3.0 * std::sqrt(exact * (1 - exact) / 40000.0));
    }
}
