#include "kickns/noise.hpp"

#include "kickns/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

namespace kickns {

std::vector<double> power_law_amplitudes(int count, double scale, double exponent) {
    std::vector<double> b(static_cast<std::size_t>(std::max(count, 0)));
    for (int j = 0; j < count; ++j) b[static_cast<std::size_t>(j)] = scale * std::pow(j + 1.0, -exponent);
    return b;
}

// ---------------------------------------------------------------------------
// Coefficient density

CoefficientDensity::CoefficientDensity(int exponent) : p_(exponent), norm_(0.0) {
    if (exponent < 2) throw InputError("noise", "density exponent must be an integer >= 2");
    double binom = 1.0;
    for (int k = 0; k <= p_; ++k) {
        poly_.push_back((k % 2 == 0 ? 1.0 : -1.0) * binom);
        binom = binom * (p_ - k) / (k + 1.0);
    }
    double total = 0.0;
    for (int k = 0; k <= p_; ++k) total += 2.0 * poly_[static_cast<std::size_t>(k)] / (2.0 * k + 1.0);
    norm_ = 1.0 / total;
}

double CoefficientDensity::pdf(double x) const noexcept {
    if (!(std::abs(x) < 1.0)) return 0.0;
    return norm_ * std::pow(1.0 - x * x, p_);
}

double CoefficientDensity::log_pdf(double x) const noexcept {
    if (!(std::abs(x) < 1.0)) return -std::numeric_limits<double>::infinity();
    return std::log(norm_) + p_ * std::log1p(-x * x);
}

double CoefficientDensity::cdf(double x) const noexcept {
    if (x <= -1.0) return 0.0;
    if (x >= 1.0) return 1.0;
    // Odd part of the antiderivative; F(x) = 1/2 + norm * sum c_k x^(2k+1)/(2k+1).
    double s = 0.0, xp = x;
    for (int k = 0; k <= p_; ++k) {
        s += poly_[static_cast<std::size_t>(k)] * xp / (2.0 * k + 1.0);
        xp *= x * x;
    }
    return std::clamp(0.5 + norm_ * s, 0.0, 1.0);
}

double CoefficientDensity::quantile(double u) const noexcept {
    if (u <= 0.0) return -1.0;
    if (u >= 1.0) return 1.0;
    double lo = -1.0, hi = 1.0;
    double x = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double f = cdf(x) - u;
        if (std::abs(f) <= 1e-13) break;
        if (f > 0.0) hi = x; else lo = x;
        const double d = pdf(x);
        double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo < 1e-15) break;
        x = next;
    }
    return x;
}

double CoefficientDensity::variance() const noexcept {
    double s = 0.0;
    for (int k = 0; k <= p_; ++k) s += 2.0 * poly_[static_cast<std::size_t>(k)] / (2.0 * k + 3.0);
    return norm_ * s;
}

// ---------------------------------------------------------------------------
// Modes

std::vector<ModeIndex> mode_ordering(int count) {
    std::vector<std::tuple<int, int, int>> triples;
    const int needed = (count + 1) / 2;
    for (int total = 3; static_cast<int>(triples.size()) < needed; ++total)
        for (int a = 1; a <= total - 2; ++a)
            for (int b = 1; a + b <= total - 1; ++b) triples.emplace_back(a, b, total - a - b);
    std::vector<ModeIndex> out;
    for (int j = 0; j < count; ++j) {
        const auto [a, b, c] = triples[static_cast<std::size_t>(j / 2)];
        out.push_back(ModeIndex{a, b, c, j % 2});
    }
    return out;
}

namespace {

double bump(double z, double lo, double hi, double sigma) noexcept {
    const double s = (2.0 * z - lo - hi) / (hi - lo);
    if (!(std::abs(s) < 1.0)) return 0.0;
    return std::exp(sigma * (1.0 - 1.0 / (1.0 - s * s)));
}

double bump_derivative(double z, double lo, double hi, double sigma) noexcept {
    const double s = (2.0 * z - lo - hi) / (hi - lo);
    if (!(std::abs(s) < 1.0)) return 0.0;
    const double q = 1.0 - s * s;
    return std::exp(sigma * (1.0 - 1.0 / q)) * sigma * (-2.0 * s / (q * q)) * (2.0 / (hi - lo));
}

// f_k(z) = bump(z) sin(k pi (z - lo) / L) and its derivative.
double axis_factor(int k, double z, double lo, double hi, double sigma) noexcept {
    const double b = bump(z, lo, hi, sigma);
    if (b == 0.0) return 0.0;
    return b * std::sin(k * std::numbers::pi * (z - lo) / (hi - lo));
}

double axis_factor_derivative(int k, double z, double lo, double hi, double sigma) noexcept {
    const double w = k * std::numbers::pi / (hi - lo);
    const double arg = w * (z - lo);
    return bump_derivative(z, lo, hi, sigma) * std::sin(arg) + bump(z, lo, hi, sigma) * w * std::cos(arg);
}

struct AxisGram {
    Eigen::MatrixXd value;  // int f_k f_l
    Eigen::MatrixXd slope;  // int f_k' f_l'
};

AxisGram axis_gram(int max_freq, double lo, double hi, double sigma, int nodes) {
    Eigen::MatrixXd f(nodes, max_freq), df(nodes, max_freq);
    const double h = (hi - lo) / nodes;
    for (int q = 0; q < nodes; ++q) {
        const double z = lo + (q + 0.5) * h;
        for (int k = 1; k <= max_freq; ++k) {
            f(q, k - 1) = axis_factor(k, z, lo, hi, sigma);
            df(q, k - 1) = axis_factor_derivative(k, z, lo, hi, sigma);
        }
    }
    return AxisGram{h * f.transpose() * f, h * df.transpose() * df};
}

}  // namespace

NoiseModel::NoiseModel(NoiseOptions opt) : opt_(std::move(opt)), density_(opt_.density_exponent) {}

NoiseModel NoiseModel::build(const NoiseOptions& options) {
    const Window& w = options.window;
    if (options.amplitudes.empty()) throw InputError("noise", "at least one noise mode is required");
    for (std::size_t j = 0; j < options.amplitudes.size(); ++j)
        if (!(options.amplitudes[j] > 0.0) || !std::isfinite(options.amplitudes[j]))
            throw NondegeneracyError("amplitude b_" + std::to_string(j + 1) + " must be positive");
    if (!(w.t0 >= 0.0 && w.t0 < w.t1 && w.t1 <= 1.0))
        throw GeometryError("time window must satisfy 0 <= t0 < t1 <= 1");
    if (!(w.x0 > 0.0 && w.x0 < w.x1 && w.x1 < 1.0 && w.y0 > 0.0 && w.y0 < w.y1 && w.y1 < 1.0))
        throw GeometryError("spatial window must lie strictly inside the unit square");
    if (!(options.cutoff_sharpness > 0.0)) throw InputError("noise", "cutoff sharpness must be positive");
    if (options.quadrature_points < 16) throw InputError("noise", "quadrature needs at least 16 nodes per axis");

    NoiseModel m(options);
    const int J = m.modes();
    m.modes_ = mode_ordering(J);
    m.normalisation_ = std::sqrt(8.0 / (w.duration() * w.width() * w.height()));

    int fa = 1, fb = 1, fc = 1;
    for (const auto& md : m.modes_) {
        fa = std::max(fa, md.a);
        fb = std::max(fb, md.b);
        fc = std::max(fc, md.c);
    }
    const double sigma = options.cutoff_sharpness;
    const int nq = options.quadrature_points;
    const AxisGram gt = axis_gram(fa, w.t0, w.t1, sigma, nq);
    const AxisGram gx = axis_gram(fb, w.x0, w.x1, sigma, nq);
    const AxisGram gy = axis_gram(fc, w.y0, w.y1, sigma, nq);

    const double n2 = m.normalisation_ * m.normalisation_;
    m.gram_l2_ = Eigen::MatrixXd::Zero(J, J);
    m.gram_grad_ = Eigen::MatrixXd::Zero(J, J);
    for (int j = 0; j < J; ++j) {
        for (int k = 0; k < J; ++k) {
            const ModeIndex& p = m.modes_[static_cast<std::size_t>(j)];
            const ModeIndex& q = m.modes_[static_cast<std::size_t>(k)];
            if (p.component != q.component) continue;
            const double t = gt.value(p.a - 1, q.a - 1), x = gx.value(p.b - 1, q.b - 1), y = gy.value(p.c - 1, q.c - 1);
            m.gram_l2_(j, k) = n2 * t * x * y;
            m.gram_grad_(j, k) = n2 * (gt.slope(p.a - 1, q.a - 1) * x * y + t * gx.slope(p.b - 1, q.b - 1) * y +
                                       t * x * gy.slope(p.c - 1, q.c - 1));
        }
    }
    for (int j = 0; j < J; ++j) {
        m.kick_radius_ += m.amplitude(j) * m.l2_norm(j);
        m.b_trunc_ += m.amplitude(j) * m.h1_norm(j);
    }
    return m;
}

NoiseModel NoiseModel::scaled(double s) const {
    if (!(s > 0.0)) throw NondegeneracyError("amplitude scale must be positive");
    NoiseOptions o = opt_;
    for (double& b : o.amplitudes) b *= s;
    return build(o);
}

double NoiseModel::cutoff(double t, double x, double y) const noexcept {
    const Window& w = opt_.window;
    const double s = opt_.cutoff_sharpness;
    const double bt = bump(t, w.t0, w.t1, s);
    if (bt == 0.0) return 0.0;
    const double bx = bump(x, w.x0, w.x1, s);
    if (bx == 0.0) return 0.0;
    return bt * bx * bump(y, w.y0, w.y1, s);
}

double NoiseModel::phi(int j, double t, double x, double y) const noexcept {
    const Window& w = opt_.window;
    const ModeIndex& md = modes_[static_cast<std::size_t>(j)];
    const double pi = std::numbers::pi;
    return normalisation_ * std::sin(md.a * pi * (t - w.t0) / w.duration()) *
           std::sin(md.b * pi * (x - w.x0) / w.width()) * std::sin(md.c * pi * (y - w.y0) / w.height());
}

double NoiseModel::psi(int j, double t, double x, double y) const noexcept {
    return time_factor(j, t) * space_factor(j, x, y);
}

double NoiseModel::time_factor(int j, double t) const noexcept {
    const Window& w = opt_.window;
    return normalisation_ * axis_factor(modes_[static_cast<std::size_t>(j)].a, t, w.t0, w.t1, opt_.cutoff_sharpness);
}

double NoiseModel::space_factor(int j, double x, double y) const noexcept {
    const Window& w = opt_.window;
    const ModeIndex& md = modes_[static_cast<std::size_t>(j)];
    const double fx = axis_factor(md.b, x, w.x0, w.x1, opt_.cutoff_sharpness);
    if (fx == 0.0) return 0.0;
    return fx * axis_factor(md.c, y, w.y0, w.y1, opt_.cutoff_sharpness);
}

// ---------------------------------------------------------------------------
// Kicks

KickRealization sample_kick(const NoiseModel& model, Stream& rng) {
    KickRealization k{Eigen::VectorXd(model.modes())};
    for (int j = 0; j < model.modes(); ++j) k.xi[j] = model.density().quantile(rng.uniform());
    return k;
}

double kick_l2_norm(const NoiseModel& model, const KickRealization& kick) {
    const Eigen::VectorXd c = kick.xi.cwiseProduct(Eigen::Map<const Eigen::VectorXd>(model.amplitudes().data(), model.modes()));
    return std::sqrt(std::max(0.0, c.dot(model.l2_gram() * c)));
}

double kick_l2_distance(const NoiseModel& model, const KickRealization& a, const KickRealization& b) {
    return kick_l2_norm(model, KickRealization{a.xi - b.xi});
}

double kick_h1_norm(const NoiseModel& model, const KickRealization& kick) {
    const Eigen::VectorXd c = kick.xi.cwiseProduct(Eigen::Map<const Eigen::VectorXd>(model.amplitudes().data(), model.modes()));
    return std::sqrt(std::max(0.0, c.dot(model.h1_gram() * c)));
}

KickForcing::KickForcing(const NoiseModel& model, const DomainSpec& domain) : model_(model), domain_(domain) {
    profiles_.reserve(static_cast<std::size_t>(model.modes()));
    const double hx = domain.hx(), hy = domain.hy();
    for (int j = 0; j < model.modes(); ++j) {
        VelocityField f(domain);
        if (model.mode(j).component == 0) {
            for (int i = 1; i < domain.nx; ++i)
                for (int k = 0; k < domain.ny; ++k) f.u(i, k) = model.space_factor(j, i * hx, (k + 0.5) * hy);
        } else {
            for (int i = 0; i < domain.nx; ++i)
                for (int k = 1; k < domain.ny; ++k) f.v(i, k) = model.space_factor(j, (i + 0.5) * hx, k * hy);
        }
        profiles_.push_back(std::move(f));
    }
}

bool KickForcing::evaluate(const KickRealization& kick, double t, VelocityField& out) const {
    out *= 0.0;
    bool any = false;
    for (int j = 0; j < model_.modes(); ++j) {
        const double c = model_.amplitude(j) * kick.xi[j] * model_.time_factor(j, t);
        if (model_.time_factor(j, t) != 0.0) any = true;
        if (c != 0.0) out.axpy(c, profiles_[static_cast<std::size_t>(j)]);
    }
    return any;
}

VelocityField eval_kick(const NoiseModel& model, const KickRealization& kick, double t, const DomainSpec& domain) {
    if (!(t >= 0.0 && t <= 1.0)) throw InputError("noise", "kick time must lie in [0, 1]");
    VelocityField out(domain);
    KickForcing(model, domain).evaluate(kick, t, out);
    return out;
}

ProbabilityEstimate kick_ball_probability(const NoiseModel& model, const std::vector<KickRealization>& targets,
                                          double radius, std::uint64_t n_mc, std::uint64_t seed) {
    std::uint64_t hits = 0;
    for (std::uint64_t trial = 0; trial < n_mc; ++trial) {
        Stream rng = Stream::derive(seed, {stream_tag::kick_ball, trial});
        bool inside = true;
        for (const auto& theta : targets) {
            const KickRealization eta = sample_kick(model, rng);
            if (!(kick_l2_distance(model, eta, theta) < radius)) inside = false;
        }
        if (inside) ++hits;
    }
    return wilson_interval(hits, n_mc);
}

}  // namespace kickns
