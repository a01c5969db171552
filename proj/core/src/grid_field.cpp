#include "kickns/grid_field.hpp"

#include "kickns/error.hpp"
#include "kickns/fast_solvers.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace kickns {

DomainSpec DomainSpec::make(int nx, int ny, double viscosity) {
    if (nx < 8 || ny < 8) throw InputError("grid_field", "grid needs at least 8 cells per axis");
    if (!(viscosity > 0.0) || !std::isfinite(viscosity)) throw InputError("grid_field", "viscosity must be positive");
    return DomainSpec{nx, ny, viscosity};
}

double CellArray::max_abs() const noexcept {
    double m = 0.0;
    for (double x : values_) m = std::max(m, std::abs(x));
    return m;
}

VelocityField::VelocityField(const DomainSpec& domain)
    : domain_(domain),
      u_(static_cast<std::size_t>(domain.u_size()), 0.0),
      v_(static_cast<std::size_t>(domain.v_size()), 0.0) {}

bool VelocityField::is_finite() const noexcept {
    auto finite = [](double x) { return std::isfinite(x); };
    return std::all_of(u_.begin(), u_.end(), finite) && std::all_of(v_.begin(), v_.end(), finite);
}

double VelocityField::max_abs() const noexcept {
    double m = 0.0;
    for (double x : u_) m = std::max(m, std::abs(x));
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
}

bool VelocityField::is_zero() const noexcept {
    auto zero = [](double x) { return x == 0.0; };
    return std::all_of(u_.begin(), u_.end(), zero) && std::all_of(v_.begin(), v_.end(), zero);
}

void VelocityField::clear_wall_normals() noexcept {
    const int nx = domain_.nx, ny = domain_.ny;
    for (int j = 0; j < ny; ++j) {
        u(0, j) = 0.0;
        u(nx, j) = 0.0;
    }
    for (int i = 0; i < nx; ++i) {
        v(i, 0) = 0.0;
        v(i, ny) = 0.0;
    }
}

void VelocityField::check_same_domain(const VelocityField& o) const {
    if (!(domain_ == o.domain_)) throw InvalidFieldError("fields live on different grids");
}

VelocityField& VelocityField::operator+=(const VelocityField& o) {
    check_same_domain(o);
    for (std::size_t k = 0; k < u_.size(); ++k) u_[k] += o.u_[k];
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
    return *this;
}

VelocityField& VelocityField::operator-=(const VelocityField& o) {
    check_same_domain(o);
    for (std::size_t k = 0; k < u_.size(); ++k) u_[k] -= o.u_[k];
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
    return *this;
}

VelocityField& VelocityField::operator*=(double s) noexcept {
    for (double& x : u_) x *= s;
    for (double& x : v_) x *= s;
    return *this;
}

VelocityField& VelocityField::axpy(double s, const VelocityField& o) {
    check_same_domain(o);
    for (std::size_t k = 0; k < u_.size(); ++k) u_[k] += s * o.u_[k];
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += s * o.v_[k];
    return *this;
}

double inner(const VelocityField& a, const VelocityField& b) {
    if (!(a.domain() == b.domain())) throw InvalidFieldError("fields live on different grids");
    double s = 0.0;
    const auto au = a.u_values(), bu = b.u_values(), av = a.v_values(), bv = b.v_values();
    for (std::size_t k = 0; k < au.size(); ++k) s += au[k] * bu[k];
    for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
    return s * a.domain().cell_area();
}

double l2_norm(const VelocityField& f) { return std::sqrt(inner(f, f)); }

double l2_distance(const VelocityField& a, const VelocityField& b) {
    if (!(a.domain() == b.domain())) throw InvalidFieldError("fields live on different grids");
    double s = 0.0;
    const auto au = a.u_values(), bu = b.u_values(), av = a.v_values(), bv = b.v_values();
    for (std::size_t k = 0; k < au.size(); ++k) s += (au[k] - bu[k]) * (au[k] - bu[k]);
    for (std::size_t k = 0; k < av.size(); ++k) s += (av[k] - bv[k]) * (av[k] - bv[k]);
    return std::sqrt(s * a.domain().cell_area());
}

FieldNorms field_norms(const VelocityField& f) {
    if (!f.is_finite()) throw InvalidFieldError("non-finite field");
    const DomainSpec& d = f.domain();
    const int nx = d.nx, ny = d.ny;
    const double ihx2 = 1.0 / (d.hx() * d.hx()), ihy2 = 1.0 / (d.hy() * d.hy());
    double grad = 0.0;
    // Normal direction: differences across all faces, wall faces read as zero.
    // Tangential direction: the odd ghost contributes (2 f)^2 / 2 per wall.
    auto uw = [&](int i, int j) { return (i == 0 || i == nx) ? 0.0 : f.u(i, j); };
    auto vw = [&](int i, int j) { return (j == 0 || j == ny) ? 0.0 : f.v(i, j); };
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const double dx = uw(i + 1, j) - uw(i, j);
            const double dy = vw(i, j + 1) - vw(i, j);
            grad += dx * dx * ihx2 + dy * dy * ihy2;
        }
    for (int i = 1; i < nx; ++i) {
        for (int j = 0; j + 1 < ny; ++j) {
            const double dy = f.u(i, j + 1) - f.u(i, j);
            grad += dy * dy * ihy2;
        }
        grad += 2.0 * (f.u(i, 0) * f.u(i, 0) + f.u(i, ny - 1) * f.u(i, ny - 1)) * ihy2;
    }
    for (int j = 1; j < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            const double dx = f.v(i + 1, j) - f.v(i, j);
            grad += dx * dx * ihx2;
        }
        grad += 2.0 * (f.v(0, j) * f.v(0, j) + f.v(nx - 1, j) * f.v(nx - 1, j)) * ihx2;
    }
    return FieldNorms{l2_norm(f), std::sqrt(grad * d.cell_area())};
}

CellArray divergence(const VelocityField& f) {
    if (!f.is_finite()) throw InvalidFieldError("non-finite field");
    const DomainSpec& d = f.domain();
    CellArray out(d.nx, d.ny);
    const double ihx = d.nx, ihy = d.ny;
    for (int i = 0; i < d.nx; ++i)
        for (int j = 0; j < d.ny; ++j)
            out(i, j) = (f.u(i + 1, j) - f.u(i, j)) * ihx + (f.v(i, j + 1) - f.v(i, j)) * ihy;
    return out;
}

double relative_divergence(const VelocityField& f) {
    const double scale = f.max_abs();
    if (scale == 0.0) return 0.0;
    const DomainSpec& d = f.domain();
    return divergence(f).max_abs() * std::min(d.hx(), d.hy()) / scale;
}

VelocityField gradient(const CellArray& p, const DomainSpec& d) {
    VelocityField g(d);
    const double ihx = d.nx, ihy = d.ny;
    for (int i = 1; i < d.nx; ++i)
        for (int j = 0; j < d.ny; ++j) g.u(i, j) = (p(i, j) - p(i - 1, j)) * ihx;
    for (int i = 0; i < d.nx; ++i)
        for (int j = 1; j < d.ny; ++j) g.v(i, j) = (p(i, j) - p(i, j - 1)) * ihy;
    return g;
}

VelocityField leray_project(const VelocityField& f) {
    if (!f.is_finite()) throw InvalidFieldError("non-finite field");
    const DomainSpec& d = f.domain();
    VelocityField out = f;
    out.clear_wall_normals();
    CellArray p = divergence(out);
    FastSolvers::get(d.nx, d.ny).solve_pressure(p.values());
    const double ihx = d.nx, ihy = d.ny;
    for (int i = 1; i < d.nx; ++i)
        for (int j = 0; j < d.ny; ++j) out.u(i, j) -= (p(i, j) - p(i - 1, j)) * ihx;
    for (int i = 0; i < d.nx; ++i)
        for (int j = 1; j < d.ny; ++j) out.v(i, j) -= (p(i, j) - p(i, j - 1)) * ihy;
    return out;
}

VelocityField vector_laplacian(const VelocityField& f) {
    const DomainSpec& d = f.domain();
    const int nx = d.nx, ny = d.ny;
    const double ihx2 = 1.0 / (d.hx() * d.hx()), ihy2 = 1.0 / (d.hy() * d.hy());
    VelocityField out(d);
    for (int i = 1; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const double c = f.u(i, j);
            const double below = j > 0 ? f.u(i, j - 1) : -c;
            const double above = j + 1 < ny ? f.u(i, j + 1) : -c;
            out.u(i, j) = (f.u(i + 1, j) - 2.0 * c + f.u(i - 1, j)) * ihx2 + (above - 2.0 * c + below) * ihy2;
        }
    }
    for (int i = 0; i < nx; ++i) {
        for (int j = 1; j < ny; ++j) {
            const double c = f.v(i, j);
            const double left = i > 0 ? f.v(i - 1, j) : -c;
            const double right = i + 1 < nx ? f.v(i + 1, j) : -c;
            out.v(i, j) = (right - 2.0 * c + left) * ihx2 + (f.v(i, j + 1) - 2.0 * c + f.v(i, j - 1)) * ihy2;
        }
    }
    return out;
}

VelocityField stokes_operator(const VelocityField& f) {
    VelocityField out = leray_project(vector_laplacian(f));
    out *= -f.domain().viscosity;
    return out;
}

VelocityField random_field(const DomainSpec& d, Stream& rng) {
    VelocityField f(d);
    for (int i = 1; i < d.nx; ++i)
        for (int j = 0; j < d.ny; ++j) f.u(i, j) = 2.0 * rng.uniform() - 1.0;
    for (int i = 0; i < d.nx; ++i)
        for (int j = 1; j < d.ny; ++j) f.v(i, j) = 2.0 * rng.uniform() - 1.0;
    return f;
}

// ---------------------------------------------------------------------------
// Stokes eigenbasis

VelocityField curl_of_streamfunction(const DomainSpec& d, std::span<const double> psi) {
    const int nx = d.nx, ny = d.ny;
    if (psi.size() != static_cast<std::size_t>((nx - 1) * (ny - 1)))
        throw InvalidFieldError("streamfunction has the wrong size");
    auto node = [&](int i, int j) -> double {
        if (i <= 0 || j <= 0 || i >= nx || j >= ny) return 0.0;
        return psi[static_cast<std::size_t>((i - 1) * (ny - 1) + (j - 1))];
    };
    VelocityField f(d);
    const double ihx = nx, ihy = ny;
    for (int i = 1; i < nx; ++i)
        for (int j = 0; j < ny; ++j) f.u(i, j) = (node(i, j + 1) - node(i, j)) * ihy;
    for (int i = 0; i < nx; ++i)
        for (int j = 1; j < ny; ++j) f.v(i, j) = -(node(i + 1, j) - node(i, j)) * ihx;
    return f;
}

StokesBasis::StokesBasis(DomainSpec domain, std::vector<VelocityField> modes, std::vector<double> eigenvalues,
                         std::vector<double> residuals)
    : domain_(domain), modes_(std::move(modes)), eigenvalues_(std::move(eigenvalues)), residuals_(std::move(residuals)) {}

Eigen::VectorXd StokesBasis::coefficients(const VelocityField& f, int count) const {
    count = std::min(count, size());
    Eigen::VectorXd c(count);
    for (int j = 0; j < count; ++j) c[j] = inner(f, modes_[static_cast<std::size_t>(j)]);
    return c;
}

VelocityField StokesBasis::synthesize(const Eigen::VectorXd& c) const {
    VelocityField f(domain_);
    for (int j = 0; j < std::min<int>(static_cast<int>(c.size()), size()); ++j) f.axpy(c[j], modes_[static_cast<std::size_t>(j)]);
    return f;
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct StreamfunctionOperators {
    SparseMatrix stiffness;  // w * C^T (-nu Laplacian) C
    SparseMatrix mass;       // w * C^T C
};

StreamfunctionOperators streamfunction_operators(const DomainSpec& d) {
    const int nx = d.nx, ny = d.ny;
    const int n_u = (nx - 1) * ny, n_v = nx * (ny - 1);
    const int n_nodes = (nx - 1) * (ny - 1);
    auto uidx = [&](int i, int j) { return (i - 1) * ny + j; };
    auto vidx = [&](int i, int j) { return n_u + i * (ny - 1) + (j - 1); };
    auto nidx = [&](int i, int j) { return (i - 1) * (ny - 1) + (j - 1); };
    auto interior_node = [&](int i, int j) { return i > 0 && j > 0 && i < nx && j < ny; };
    const double ihx = nx, ihy = ny;

    std::vector<Triplet> ct;
    for (int i = 1; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            if (interior_node(i, j + 1)) ct.emplace_back(uidx(i, j), nidx(i, j + 1), ihy);
            if (interior_node(i, j)) ct.emplace_back(uidx(i, j), nidx(i, j), -ihy);
        }
    }
    for (int i = 0; i < nx; ++i) {
        for (int j = 1; j < ny; ++j) {
            if (interior_node(i + 1, j)) ct.emplace_back(vidx(i, j), nidx(i + 1, j), -ihx);
            if (interior_node(i, j)) ct.emplace_back(vidx(i, j), nidx(i, j), ihx);
        }
    }
    SparseMatrix curl(n_u + n_v, n_nodes);
    curl.setFromTriplets(ct.begin(), ct.end());

    const double ihx2 = ihx * ihx, ihy2 = ihy * ihy;
    std::vector<Triplet> lt;
    for (int i = 1; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const int r = uidx(i, j);
            double diag = -2.0 * ihx2 - 2.0 * ihy2;
            if (i > 1) lt.emplace_back(r, uidx(i - 1, j), ihx2);
            if (i + 1 < nx) lt.emplace_back(r, uidx(i + 1, j), ihx2);
            if (j > 0) lt.emplace_back(r, uidx(i, j - 1), ihy2); else diag -= ihy2;
            if (j + 1 < ny) lt.emplace_back(r, uidx(i, j + 1), ihy2); else diag -= ihy2;
            lt.emplace_back(r, r, diag);
        }
    }
    for (int i = 0; i < nx; ++i) {
        for (int j = 1; j < ny; ++j) {
            const int r = vidx(i, j);
            double diag = -2.0 * ihx2 - 2.0 * ihy2;
            if (j > 1) lt.emplace_back(r, vidx(i, j - 1), ihy2);
            if (j + 1 < ny) lt.emplace_back(r, vidx(i, j + 1), ihy2);
            if (i > 0) lt.emplace_back(r, vidx(i - 1, j), ihx2); else diag -= ihx2;
            if (i + 1 < nx) lt.emplace_back(r, vidx(i + 1, j), ihx2); else diag -= ihx2;
            lt.emplace_back(r, r, diag);
        }
    }
    SparseMatrix lap(n_u + n_v, n_u + n_v);
    lap.setFromTriplets(lt.begin(), lt.end());

    const double w = d.cell_area();
    StreamfunctionOperators ops;
    const SparseMatrix ct_t = curl.transpose();
    ops.mass = w * (ct_t * curl);
    ops.stiffness = (-d.viscosity * w) * (ct_t * (lap * curl));
    ops.mass.makeCompressed();
    ops.stiffness.makeCompressed();
    return ops;
}

}  // namespace

StokesBasis stokes_basis(const DomainSpec& d, int count, const StokesBasisOptions& opt) {
    if (count < 1) throw InputError("grid_field", "basis size must be at least 1");
    if (count > opt.cap) throw InputError("grid_field", "basis size exceeds the configured cap");
    const int n_nodes = (d.nx - 1) * (d.ny - 1);
    if (count > n_nodes) throw InputError("grid_field", "basis size exceeds the discrete dimension");
    const int block = std::min(n_nodes, count + std::max(opt.guard_vectors, count / 2));

    const StreamfunctionOperators ops = streamfunction_operators(d);
    Eigen::SimplicialLDLT<SparseMatrix> stiff_solver(ops.stiffness);
    Eigen::SimplicialLDLT<SparseMatrix> mass_solver(ops.mass);
    if (stiff_solver.info() != Eigen::Success || mass_solver.info() != Eigen::Success)
        throw EigenSolverError("factorisation of the streamfunction operators failed", 0.0);

    Stream rng = Stream::derive(opt.seed, {stream_tag::basis_start, static_cast<std::uint64_t>(d.nx),
                                           static_cast<std::uint64_t>(d.ny), static_cast<std::uint64_t>(count)});
    Eigen::MatrixXd x(n_nodes, block);
    for (int c = 0; c < block; ++c)
        for (int r = 0; r < n_nodes; ++r) x(r, c) = 2.0 * rng.uniform() - 1.0;

    Eigen::VectorXd theta;
    double worst = 0.0;
    bool converged = false;
    for (int it = 0; it < opt.max_iterations; ++it) {
        const Eigen::MatrixXd y = stiff_solver.solve(ops.mass * x);
        const Eigen::MatrixXd ky = ops.stiffness * y;
        const Eigen::MatrixXd my = ops.mass * y;
        Eigen::MatrixXd kr = y.transpose() * ky;
        Eigen::MatrixXd mr = y.transpose() * my;
        kr = 0.5 * (kr + kr.transpose()).eval();
        mr = 0.5 * (mr + mr.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ritz(kr, mr);
        if (ritz.info() != Eigen::Success) throw EigenSolverError("Rayleigh-Ritz step failed", 0.0);
        theta = ritz.eigenvalues();
        x = y * ritz.eigenvectors();
        // Residual in H: ||C M^{-1}(K x - theta M x)|| = sqrt(r^T M^{-1} r).
        const Eigen::MatrixXd r = ky * ritz.eigenvectors() - my * ritz.eigenvectors() * theta.asDiagonal();
        const Eigen::MatrixXd mr_inv_r = mass_solver.solve(r.leftCols(count));
        worst = 0.0;
        for (int j = 0; j < count; ++j) worst = std::max(worst, std::sqrt(std::max(0.0, r.col(j).dot(mr_inv_r.col(j)))));
        if (worst <= 0.1 * opt.residual_tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) throw EigenSolverError("Stokes eigensolver did not converge", worst);

    std::vector<VelocityField> modes;
    std::vector<double> eigenvalues, residuals;
    modes.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        Eigen::VectorXd col = x.col(j);
        // Deterministic sign: the largest streamfunction entry is positive.
        Eigen::Index arg = 0;
        col.cwiseAbs().maxCoeff(&arg);
        if (col[arg] < 0.0) col = -col;
        VelocityField e = curl_of_streamfunction(d, std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
        e *= 1.0 / l2_norm(e);
        VelocityField res = stokes_operator(e);
        res.axpy(-theta[j], e);
        const double rn = l2_norm(res);
        if (!(rn <= opt.residual_tolerance)) throw EigenSolverError("Stokes eigenpair residual too large", rn);
        residuals.push_back(rn);
        eigenvalues.push_back(theta[j]);
        modes.push_back(std::move(e));
    }
    return StokesBasis(d, std::move(modes), std::move(eigenvalues), std::move(residuals));
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

constexpr char kMagic[4] = {'K', 'N', 'S', 'F'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(x >> (8 * b)));
}

void put_f64(std::vector<std::uint8_t>& out, double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw InputError("grid_field", "truncated snapshot");
    std::uint32_t x = 0;
    for (int b = 0; b < 4; ++b) x |= std::uint32_t{in[pos + static_cast<std::size_t>(b)]} << (8 * b);
    pos += 4;
    return x;
}

double get_f64(std::span<const std::uint8_t> in, std::size_t& pos) {
    if (pos + 8 > in.size()) throw InputError("grid_field", "truncated snapshot");
    std::uint64_t x = 0;
    for (int b = 0; b < 8; ++b) x |= std::uint64_t{in[pos + static_cast<std::size_t>(b)]} << (8 * b);
    pos += 8;
    return std::bit_cast<double>(x);
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const VelocityField& f) {
    const DomainSpec& d = f.domain();
    std::vector<std::uint8_t> out;
    out.reserve(24 + 8 * static_cast<std::size_t>(d.u_size() + d.v_size()));
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, kSnapshotVersion);
    put_u32(out, static_cast<std::uint32_t>(d.nx));
    put_u32(out, static_cast<std::uint32_t>(d.ny));
    put_f64(out, d.viscosity);
    for (double x : f.u_values()) put_f64(out, x);
    for (double x : f.v_values()) put_f64(out, x);
    return out;
}

VelocityField decode_snapshot(std::span<const std::uint8_t> in) {
    if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0) throw InputError("grid_field", "not a field snapshot");
    std::size_t pos = 4;
    const std::uint32_t version = get_u32(in, pos);
    if (version != kSnapshotVersion) throw InputError("grid_field", "unsupported snapshot version " + std::to_string(version));
    const auto nx = static_cast<int>(get_u32(in, pos));
    const auto ny = static_cast<int>(get_u32(in, pos));
    const double nu = get_f64(in, pos);
    VelocityField f(DomainSpec::make(nx, ny, nu));
    for (double& x : f.u_values()) x = get_f64(in, pos);
    for (double& x : f.v_values()) x = get_f64(in, pos);
    if (pos != in.size()) throw InputError("grid_field", "trailing bytes in snapshot");
    return f;
}

void write_snapshot(const std::filesystem::path& path, const VelocityField& f) {
    const auto bytes = encode_snapshot(f);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("grid_field", "cannot open " + path.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw InputError("grid_field", "write failed for " + path.string());
}

VelocityField read_snapshot(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("grid_field", "cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_snapshot(bytes);
}

}  // namespace kickns
