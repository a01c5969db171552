#include "kickns/ldp_estimation.hpp"

#include <cstdio>
#include <numeric>

namespace kickns {

Potential Potential::constant(double c, std::string id) {
    Potential p;
    p.kind_ = Kind::constant;
    p.c_ = c;
    p.id_ = std::move(id);
    return p;
}

Potential Potential::affine(double c, Eigen::VectorXd linear, std::string id) {
    Potential p = constant(c, std::move(id));
    p.kind_ = Kind::affine;
    p.a_ = std::move(linear);
    return p;
}

Potential Potential::quadratic(double c, Eigen::VectorXd linear, Eigen::VectorXd diagonal, std::string id) {
    Potential p = affine(c, std::move(linear), std::move(id));
    p.kind_ = Kind::quadratic;
    p.q_ = std::move(diagonal);
    if (p.a_.size() == 0) p.a_ = Eigen::VectorXd::Zero(p.q_.size());
    if (p.a_.size() != p.q_.size()) throw InputError("ldp_estimation", "quadratic potential coefficient sizes differ");
    return p;
}

Potential Potential::tabulated(Eigen::VectorXd values, std::string id) {
    Potential p = constant(0.0, std::move(id));
    p.kind_ = Kind::table;
    p.table_ = std::move(values);
    return p;
}

double Potential::operator()(const Eigen::VectorXd& x) const {
    switch (kind_) {
        case Kind::constant:
            return c_;
        case Kind::affine:
        case Kind::quadratic: {
            if (x.size() < a_.size()) throw InputError("ldp_estimation", "feature vector shorter than the potential");
            double v = c_ + a_.dot(x.head(a_.size()));
            if (kind_ == Kind::quadratic) v += q_.dot(x.head(q_.size()).cwiseAbs2());
            return v;
        }
        case Kind::table:
            break;
    }
    throw InputError("ldp_estimation", "tabulated potential evaluated on a feature vector");
}

double Potential::operator()(int state) const {
    if (kind_ == Kind::constant) return c_;
    if (kind_ != Kind::table) throw InputError("ldp_estimation", "feature potential evaluated on a state index");
    if (state < 0 || state >= table_.size()) throw InputError("ldp_estimation", "state index outside the potential table");
    return table_[state];
}

Potential Potential::shifted(double s) const {
    Potential p = *this;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+g", s);
    p.id_ += buf;
    if (kind_ == Kind::table)
        p.table_.array() += s;
    else
        p.c_ += s;
    return p;
}

double Potential::sup_bound(const Eigen::VectorXd& bound) const {
    switch (kind_) {
        case Kind::constant:
            return std::abs(c_);
        case Kind::table:
            return table_.size() ? table_.cwiseAbs().maxCoeff() : 0.0;
        case Kind::affine:
        case Kind::quadratic: {
            if (bound.size() < a_.size()) throw InputError("ldp_estimation", "bound vector shorter than the potential");
            const Eigen::VectorXd b = bound.head(a_.size());
            double s = std::abs(c_) + a_.cwiseAbs().dot(b);
            if (kind_ == Kind::quadratic) s += q_.cwiseAbs().dot(b.cwiseAbs2());
            return s;
        }
    }
    return 0.0;
}

double Potential::lipschitz(const Eigen::VectorXd& bound) const {
    switch (kind_) {
        case Kind::constant:
            return 0.0;
        case Kind::table:
            // oscillation, a Lipschitz constant for the discrete metric
            return table_.size() ? table_.maxCoeff() - table_.minCoeff() : 0.0;
        case Kind::affine:
            return a_.norm();
        case Kind::quadratic: {
            if (bound.size() < a_.size()) throw InputError("ldp_estimation", "bound vector shorter than the potential");
            return (a_.cwiseAbs() + 2.0 * q_.cwiseAbs().cwiseProduct(bound.head(a_.size()))).norm();
        }
    }
    return 0.0;
}

double implied_gamma(double q, double sup_norm) noexcept { return -std::log(q) - sup_norm; }

std::vector<Potential> default_dictionary(int feature_dim, int coordinates, double radius,
                                          const std::vector<double>& scales) {
    if (coordinates > feature_dim) throw InputError("ldp_estimation", "dictionary coordinates exceed the feature dimension");
    if (!(radius > 0.0)) throw InputError("ldp_estimation", "dictionary radius must be positive");
    std::vector<Potential> d{Potential::constant(0.0, "zero")};
    char buf[64];
    for (int k = 0; k < coordinates; ++k) {
        for (double c : scales) {
            for (double sign : {1.0, -1.0}) {
                Eigen::VectorXd a = Eigen::VectorXd::Zero(feature_dim);
                a[k] = sign * c / radius;
                std::snprintf(buf, sizeof buf, "lin%d:%+g", k, sign * c);
                d.push_back(Potential::affine(0.0, a, buf));
            }
            for (double sign : {1.0, -1.0}) {
                Eigen::VectorXd q = Eigen::VectorXd::Zero(feature_dim);
                q[k] = sign * c / (radius * radius);
                std::snprintf(buf, sizeof buf, "quad%d:%+g", k, sign * c);
                d.push_back(Potential::quadratic(0.0, Eigen::VectorXd::Zero(feature_dim), q, buf));
            }
        }
    }
    return d;
}

double histogram_expectation(const Potential& v, const SparseHistogram& sigma, const FeatureBinning& binning,
                             int feature_dim) {
    double s = 0.0;
    Eigen::VectorXd x(feature_dim);
    for (const auto& [bin, p] : sigma) {
        x.setZero();
        for (std::size_t i = 0; i < bin.size() && static_cast<int>(i) < feature_dim; ++i)
            x[static_cast<Eigen::Index>(i)] = binning.centre(bin[i]);
        s += p * v(x);
    }
    return s;
}

// ---------------------------------------------------------------------------

namespace {

double column_max(const Eigen::MatrixXd& m, Eigen::Index k) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m.rows(); ++i) top = std::max(top, m(i, k));
    return top;
}

}  // namespace

FkEstimate fk_column_estimate(const FkSamples& s, std::size_t k) {
    const auto c = static_cast<Eigen::Index>(k);
    if (c >= s.log_weight.cols()) throw InputError("ldp_estimation", "Feynman-Kac step beyond the simulated horizon");
    const auto n = static_cast<std::size_t>(s.log_weight.rows());
    if (n == 0) return {};
    const double top = column_max(s.log_weight, c);
    if (!std::isfinite(top)) throw DegeneracyError("ldp_estimation", "path weights overflow at step " + std::to_string(k));
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        terms[i] = std::exp(s.log_weight(r, c) - top) * s.value(r, c);
    }
    const MeanEstimate m = mean_estimate(terms);
    const double scale = std::exp(top);
    return FkEstimate{m.mean * scale, m.standard_error * scale, n};
}

FkEstimate fk_paired_difference(const FkSamples& a, const FkSamples& b, std::size_t k) {
    const auto c = static_cast<Eigen::Index>(k);
    if (a.log_weight.rows() != b.log_weight.rows())
        throw InputError("ldp_estimation", "paired Feynman-Kac samples differ in size");
    const auto n = static_cast<std::size_t>(a.log_weight.rows());
    if (n == 0) return {};
    const double top = std::max(column_max(a.log_weight, c), column_max(b.log_weight, c));
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        terms[i] = std::exp(a.log_weight(r, c) - top) * a.value(r, c) - std::exp(b.log_weight(r, c) - top) * b.value(r, c);
    }
    const MeanEstimate m = mean_estimate(terms);
    const double scale = std::exp(top);
    return FkEstimate{m.mean * scale, m.standard_error * scale, n};
}

double effective_sample_size(const std::vector<double>& log_weights) {
    if (log_weights.empty()) return 0.0;
    const double top = *std::max_element(log_weights.begin(), log_weights.end());
    double s = 0.0, s2 = 0.0;
    for (double lw : log_weights) {
        const double w = std::exp(lw - top);
        s += w;
        s2 += w * w;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

std::vector<std::size_t> multinomial_ancestors(const std::vector<double>& log_weights, Stream& rng) {
    const std::size_t n = log_weights.size();
    const double top = *std::max_element(log_weights.begin(), log_weights.end());
    std::vector<double> cum(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += std::exp(log_weights[i] - top);
        cum[i] = total;
    }
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * total;
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        out[i] = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), n - 1);
    }
    return out;
}

double log_weighted_mean_exp(const std::vector<double>& log_weights, const std::vector<double>& values,
                             std::size_t step) {
    double vmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i)
        if (std::isfinite(log_weights[i]) && values[i] > vmax) vmax = values[i];
    if (!std::isfinite(vmax)) throw DegeneracyError("ldp_estimation", "all particle weights collapsed at step " + std::to_string(step));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = std::exp(log_weights[i]);
        num += w * std::exp(values[i] - vmax);
        den += w;
    }
    const double r = num / den;
    if (!(r > 0.0) || !std::isfinite(r))
        throw DegeneracyError("ldp_estimation", "all particle weights collapsed at step " + std::to_string(step));
    return vmax + std::log(r);
}

const char* to_string(QMethod m) noexcept { return m == QMethod::direct ? "direct" : "cloning"; }

MeanEstimate batch_mean(const std::vector<double>& series, std::size_t first, std::size_t batches) {
    if (first >= series.size()) throw InputError("ldp_estimation", "empty retained window");
    const std::span<const double> window(series.data() + first, series.size() - first);
    MeanEstimate m = mean_estimate(window);
    const std::size_t b = std::min(batches, window.size());
    if (b < 2) {
        m.standard_error = 0.0;
        return m;
    }
    const std::size_t size = window.size() / b;
    const std::size_t offset = window.size() - size * b;
    std::vector<double> means(b);
    for (std::size_t k = 0; k < b; ++k)
        means[k] = mean_estimate(window.subspan(offset + k * size, size)).mean;
    m.standard_error = mean_estimate(means).standard_error;
    return m;
}

QEstimate pool_q(std::vector<MeanEstimate> per_initial, std::vector<std::vector<double>> running, const QOptions& opt) {
    QEstimate q;
    q.method = opt.method;
    q.n = opt.n;
    q.particles = opt.particles;
    std::vector<double> values;
    double var = 0.0;
    for (const auto& m : per_initial) {
        values.push_back(m.mean);
        q.per_initial_se.push_back(m.standard_error);
        var += m.standard_error * m.standard_error;
    }
    const auto k = static_cast<double>(values.size());
    q.value = mean_estimate(values).mean;
    q.standard_error = std::sqrt(var) / k;
    q.spread = *std::max_element(values.begin(), values.end()) - *std::min_element(values.begin(), values.end());
    q.per_initial = std::move(values);

    const std::size_t len = running.front().size();
    q.running.assign(len, 0.0);
    for (auto& r : running) {
        if (opt.method == QMethod::cloning) {
            double s = 0.0;
            for (std::size_t i = 0; i < r.size(); ++i) {
                s += r[i];
                r[i] = s / static_cast<double>(i + 1);
            }
        }
        for (std::size_t i = 0; i < len; ++i) q.running[i] += r[i] / k;
    }
    return q;
}

RateFunctionEstimate estimate_rate_function(const std::vector<Potential>& dictionary,
                                            const std::vector<double>& sigma_values,
                                            const std::vector<double>& sigma_se,
                                            const std::vector<QEstimate>& q) {
    if (dictionary.empty()) throw InputError("ldp_estimation", "empty potential dictionary");
    if (sigma_values.size() != dictionary.size() || q.size() != dictionary.size() ||
        (!sigma_se.empty() && sigma_se.size() != dictionary.size()))
        throw InputError("ldp_estimation", "rate-function inputs do not match the dictionary size");
    RateFunctionEstimate r;
    double sq = 0.0;
    for (std::size_t k = 0; k < dictionary.size(); ++k) {
        const double b = sigma_values[k] - q[k].value;
        const double ss = sigma_se.empty() ? 0.0 : sigma_se[k];
        const double se = std::sqrt(q[k].standard_error * q[k].standard_error + ss * ss);
        r.brackets.push_back(b);
        r.bracket_se.push_back(se);
        r.max_q_se = std::max(r.max_q_se, q[k].standard_error);
        sq += se * se;
        if (k == 0 || b > r.value) {
            r.value = b;
            r.argmax = k;
        }
    }
    r.argmax_id = dictionary[r.argmax].id();
    r.pooled_se = std::sqrt(sq / static_cast<double>(dictionary.size()));
    return r;
}

}  // namespace kickns
