#include "kickns/oracle.hpp"

#include "kickns/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace kickns {

FiniteChain::FiniteChain(Eigen::MatrixXd p, Eigen::MatrixXd coordinates, std::optional<Eigen::VectorXd> potential,
                         bool require_irreducible)
    : p_(std::move(p)), coords_(std::move(coordinates)), potential_(std::move(potential)) {
    const Eigen::Index s = p_.rows();
    if (s == 0 || p_.cols() != s) throw InputError("oracle", "transition matrix must be square and nonempty");
    for (Eigen::Index i = 0; i < s; ++i) {
        if ((p_.row(i).array() < 0.0).any() || !p_.row(i).allFinite())
            throw InputError("oracle", "negative or non-finite entry in row " + std::to_string(i));
        if (std::abs(p_.row(i).sum() - 1.0) > 1e-12)
            throw InputError("oracle", "row " + std::to_string(i) + " does not sum to 1");
    }
    if (coords_.size() == 0) {
        coords_.resize(s, 1);
        for (Eigen::Index i = 0; i < s; ++i) coords_(i, 0) = static_cast<double>(i);
    }
    if (coords_.rows() != s) throw InputError("oracle", "coordinate rows do not match the state count");
    if (potential_ && potential_->size() != s) throw InputError("oracle", "potential length does not match the state count");
    if (require_irreducible && !irreducible()) throw InputError("oracle", "chain is flagged irreducible but is not");
    cumulative_.resize(s, s);
    for (Eigen::Index i = 0; i < s; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < s; ++j) {
            acc += p_(i, j);
            cumulative_(i, j) = acc;
        }
    }
}

bool FiniteChain::irreducible() const {
    const int s = size();
    for (int root = 0; root < s; ++root) {
        std::vector<char> seen(static_cast<std::size_t>(s), 0);
        std::vector<int> stack{root};
        seen[static_cast<std::size_t>(root)] = 1;
        int count = 1;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int j = 0; j < s; ++j) {
                if (p_(i, j) > 0.0 && !seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = 1;
                    ++count;
                    stack.push_back(j);
                }
            }
        }
        if (count != s) return false;
    }
    return true;
}

int FiniteChain::step(int i, Stream& rng) const {
    const double u = rng.uniform() * cumulative_(i, size() - 1);
    for (int j = 0; j < size(); ++j)
        if (u < cumulative_(i, j) && p_(i, j) > 0.0) return j;
    // rounding at the top of the row: last state with positive mass
    for (int j = size() - 1; j >= 0; --j)
        if (p_(i, j) > 0.0) return j;
    return i;
}

double FiniteChain::distance(int i, int j) const { return (coords_.row(i) - coords_.row(j)).norm(); }

FiniteChain random_chain(int states, Stream& rng) {
    Eigen::MatrixXd p(states, states);
    for (int i = 0; i < states; ++i) {
        for (int j = 0; j < states; ++j) p(i, j) = rng.uniform();
        p.row(i) /= p.row(i).sum();
    }
    return FiniteChain(std::move(p));
}

// ---------------------------------------------------------------------------
// Text format

namespace {

bool next_content_line(std::istream& in, std::string& line, int& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        return true;
    }
    return false;
}

std::vector<double> numbers(const std::string& line, int lineno, std::size_t expected) {
    std::istringstream ss(line);
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (!ss.eof() || v.size() != expected)
        throw InputError("oracle", "line " + std::to_string(lineno) + ": expected " + std::to_string(expected) + " numbers");
    return v;
}

}  // namespace

FiniteChain parse_chain(std::istream& in) {
    std::string line;
    int lineno = 0;
    if (!next_content_line(in, line, lineno)) throw InputError("oracle", "empty chain file");
    std::istringstream head(line);
    std::string word;
    int s = 0, dim = 1;
    head >> word >> s;
    if (word != "states" || !head || s <= 0) throw InputError("oracle", "line " + std::to_string(lineno) + ": expected 'states S'");
    if (head >> word) {
        if (word != "dim" || !(head >> dim) || dim <= 0)
            throw InputError("oracle", "line " + std::to_string(lineno) + ": expected 'dim D'");
    }
    Eigen::MatrixXd p(s, s);
    for (int i = 0; i < s; ++i) {
        if (!next_content_line(in, line, lineno)) throw InputError("oracle", "missing transition row " + std::to_string(i));
        const auto row = numbers(line, lineno, static_cast<std::size_t>(s));
        for (int j = 0; j < s; ++j) p(i, j) = row[static_cast<std::size_t>(j)];
    }
    Eigen::MatrixXd coords;
    std::optional<Eigen::VectorXd> potential;
    while (next_content_line(in, line, lineno)) {
        std::istringstream ss(line);
        ss >> word;
        if (word == "coords") {
            coords.resize(s, dim);
            for (int i = 0; i < s; ++i) {
                if (!next_content_line(in, line, lineno)) throw InputError("oracle", "missing coordinate row " + std::to_string(i));
                const auto row = numbers(line, lineno, static_cast<std::size_t>(dim));
                for (int d = 0; d < dim; ++d) coords(i, d) = row[static_cast<std::size_t>(d)];
            }
        } else if (word == "potential") {
            if (!next_content_line(in, line, lineno)) throw InputError("oracle", "missing potential values");
            const auto row = numbers(line, lineno, static_cast<std::size_t>(s));
            potential = Eigen::Map<const Eigen::VectorXd>(row.data(), s);
        } else {
            throw InputError("oracle", "line " + std::to_string(lineno) + ": unknown section '" + word + "'");
        }
    }
    return FiniteChain(std::move(p), std::move(coords), std::move(potential));
}

FiniteChain read_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("oracle", "cannot open chain file " + path);
    return parse_chain(in);
}

void write_chain(std::ostream& out, const FiniteChain& c) {
    const int s = c.size();
    const auto dim = c.coordinates().cols();
    out.precision(17);
    out << "states " << s << " dim " << dim << '\n';
    for (int i = 0; i < s; ++i) {
        for (int j = 0; j < s; ++j) out << (j ? " " : "") << c.matrix()(i, j);
        out << '\n';
    }
    out << "coords\n";
    for (int i = 0; i < s; ++i) {
        for (Eigen::Index d = 0; d < dim; ++d) out << (d ? " " : "") << c.coordinates()(i, d);
        out << '\n';
    }
    if (c.potential()) {
        out << "potential\n";
        for (int i = 0; i < s; ++i) out << (i ? " " : "") << (*c.potential())[i];
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Exact Feynman-Kac objects

namespace {

void check_potential(const FiniteChain& c, const Eigen::VectorXd& v) {
    if (v.size() != c.size()) throw InputError("oracle", "potential length does not match the state count");
}

void check_spectral(const FiniteChain& c) {
    if (c.size() > oracle_max_states)
        throw InputError("oracle", "dense eigensolve limited to " + std::to_string(oracle_max_states) + " states");
    if (!c.irreducible()) throw InputError("oracle", "chain is reducible");
}

bool is_constant(const Eigen::VectorXd& v) { return (v.array() == v[0]).all(); }

// Perron eigenvalue and eigenvector of a nonnegative irreducible matrix.
struct Perron {
    double value;
    Eigen::VectorXd vector;
    double subdominant;
    int multiplicity;
};

Perron perron(const Eigen::MatrixXd& a) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw DegeneracyError("oracle", "dense eigensolve failed");
    const auto& ev = es.eigenvalues();
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < ev.size(); ++k)
        if (ev[k].real() > ev[best].real()) best = k;
    const double lambda = ev[best].real();
    Perron p{lambda, es.eigenvectors().col(best).real(), 0.0, 0};
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        if (std::abs(ev[k] - ev[best]) <= 1e-9 * lambda)
            ++p.multiplicity;
        else
            p.subdominant = std::max(p.subdominant, std::abs(ev[k]));
    }
    if (p.vector.sum() < 0.0) p.vector = -p.vector;
    return p;
}

}  // namespace

Eigen::MatrixXd weighted_matrix(const FiniteChain& c, const Eigen::VectorXd& v) {
    check_potential(c, v);
    return c.matrix() * v.array().exp().matrix().asDiagonal();
}

Eigen::VectorXd exact_fk_apply(const FiniteChain& c, const Eigen::VectorXd& v, const Eigen::VectorXd& f, int n) {
    if (f.size() != c.size()) throw InputError("oracle", "observable length does not match the state count");
    const Eigen::MatrixXd a = weighted_matrix(c, v);
    Eigen::VectorXd g = f;
    for (int k = 0; k < n; ++k) g = a * g;
    return g;
}

Eigen::VectorXd enumerate_fk_paths(const FiniteChain& c, const Eigen::VectorXd& v, const Eigen::VectorXd& f, int n) {
    check_potential(c, v);
    const int s = c.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(s);
    std::vector<int> path(static_cast<std::size_t>(n), 0);
    for (int start = 0; start < s; ++start) {
        std::fill(path.begin(), path.end(), 0);
        for (;;) {
            double prob = 1.0, sum_v = 0.0;
            int prev = start;
            for (int x : path) {
                prob *= c.matrix()(prev, x);
                sum_v += v[x];
                prev = x;
            }
            out[start] += prob * std::exp(sum_v) * f[prev];
            // odometer increment
            int k = n - 1;
            while (k >= 0 && ++path[static_cast<std::size_t>(k)] == s) path[static_cast<std::size_t>(k--)] = 0;
            if (k < 0) break;
        }
    }
    return out;
}

double exact_Q(const FiniteChain& c, const Eigen::VectorXd& v) {
    check_potential(c, v);
    check_spectral(c);
    if (is_constant(v)) return v[0];
    return std::log(perron(weighted_matrix(c, v)).value);
}

EigenTriple exact_eigen_triple(const FiniteChain& c, const Eigen::VectorXd& v) {
    check_potential(c, v);
    check_spectral(c);
    const Eigen::MatrixXd a = weighted_matrix(c, v);
    const Perron right = perron(a);
    const Perron left = perron(a.transpose());
    if (right.multiplicity != 1 || left.multiplicity != 1) throw DegeneracyError("oracle", "Perron root is not simple");
    EigenTriple t;
    t.lambda = right.value;
    t.subdominant = right.subdominant;
    t.mu = left.vector / left.vector.sum();
    t.h = right.vector / right.vector.dot(t.mu);
    if ((t.h.array() <= 0.0).any()) throw DegeneracyError("oracle", "Perron vector is not strictly positive");
    return t;
}

std::vector<double> eigen_triple_errors(const FiniteChain& c, const Eigen::VectorXd& v, const Eigen::VectorXd& f,
                                        int k_max) {
    const EigenTriple t = exact_eigen_triple(c, v);
    const Eigen::MatrixXd a = weighted_matrix(c, v) / t.lambda;
    const Eigen::VectorXd limit = f.dot(t.mu) * t.h;
    std::vector<double> err;
    Eigen::VectorXd g = f;
    for (int k = 0; k <= k_max; ++k) {
        err.push_back((g - limit).cwiseAbs().maxCoeff());
        g = a * g;
    }
    return err;
}

double fitted_geometric_ratio(const std::vector<double>& errors, double floor) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < errors.size(); ++k) {
        if (!(errors[k] > floor)) continue;
        const double x = static_cast<double>(k), y = std::log(errors[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return 0.0;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return std::exp(slope);
}

std::vector<Eigen::VectorXd> potential_grid(const std::vector<std::vector<double>>& axes) {
    std::vector<Eigen::VectorXd> out;
    const auto s = static_cast<Eigen::Index>(axes.size());
    for (const auto& a : axes)
        if (a.empty()) return out;
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
        Eigen::VectorXd v(s);
        for (Eigen::Index i = 0; i < s; ++i) v[i] = axes[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
        out.push_back(std::move(v));
        bool advanced = false;
        for (std::size_t k = axes.size(); k-- > 0 && !advanced;) {
            if (++idx[k] < axes[k].size())
                advanced = true;
            else
                idx[k] = 0;
        }
        if (!advanced) return out;
    }
}

ExactRate exact_rate_function(const FiniteChain& c, const Eigen::VectorXd& sigma, const std::vector<Eigen::VectorXd>& grid) {
    if (sigma.size() != c.size()) throw InputError("oracle", "sigma length does not match the state count");
    if ((sigma.array() < 0.0).any() || std::abs(sigma.sum() - 1.0) > 1e-12)
        throw InputError("oracle", "sigma is not a probability vector");
    if (grid.empty()) throw InputError("oracle", "empty potential grid");
    ExactRate r;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double b = grid[k].dot(sigma) - exact_Q(c, grid[k]);
        if (k == 0 || b > r.value) {
            r.value = b;
            r.argmax = k;
        }
    }
    return r;
}

double point_mass_rate(const FiniteChain& c, int x) { return -std::log(c.matrix()(x, x)); }

Eigen::VectorXd stationary_distribution(const FiniteChain& c) {
    check_spectral(c);
    const Perron left = perron(c.matrix().transpose());
    return left.vector / left.vector.sum();
}

std::vector<ExactUfpRow> exact_ufp(const FiniteChain& c, const Eigen::VectorXd& v, const Eigen::VectorXd& f,
                                   const std::vector<std::pair<int, int>>& pairs, int n_max) {
    const Eigen::MatrixXd a = weighted_matrix(c, v);
    Eigen::VectorXd g = f;
    Eigen::VectorXd one = Eigen::VectorXd::Ones(c.size());
    double log_scale = 0.0;
    std::vector<ExactUfpRow> rows;
    for (int n = 1; n <= n_max; ++n) {
        g = a * g;
        one = a * one;
        const double top = one.maxCoeff();
        g /= top;
        one /= top;
        log_scale += std::log(top);
        ExactUfpRow row{n, 0.0, log_scale};
        for (const auto& [i, j] : pairs) {
            const double d = c.distance(i, j);
            if (!(d >= 1e-12)) throw InputError("oracle", "uniform Feller pair closer than 1e-12");
            row.ratio = std::max(row.ratio, std::abs(g[i] - g[j]) / d);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace kickns
