#pragma once

#include "kickns/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kickns {

/// Unit square cut into nx-by-ny cells, plus the viscosity of the flow.
struct DomainSpec {
    int nx = 32;
    int ny = 32;
    double viscosity = 0.05;

    /// Validated constructor: nx, ny >= 8 and viscosity > 0.
    static DomainSpec make(int nx, int ny, double viscosity);

    double hx() const noexcept { return 1.0 / nx; }
    double hy() const noexcept { return 1.0 / ny; }
    double cell_area() const noexcept { return hx() * hy(); }
    int u_size() const noexcept { return (nx + 1) * ny; }
    int v_size() const noexcept { return nx * (ny + 1); }

    friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

/// Cell-centred scalar, row-major in (i, j) with i the x index.
class CellArray {
public:
    CellArray(int nx, int ny) : nx_(nx), ny_(ny), values_(static_cast<std::size_t>(nx) * ny, 0.0) {}

    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    double operator()(int i, int j) const { return values_[static_cast<std::size_t>(i) * ny_ + j]; }
    double& operator()(int i, int j) { return values_[static_cast<std::size_t>(i) * ny_ + j]; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    double max_abs() const noexcept;

private:
    int nx_;
    int ny_;
    std::vector<double> values_;
};

/// Velocity on a MAC grid. u(i, j) sits on the vertical face x = i*hx,
/// y = (j + 1/2)*hy for i = 0..nx; v(i, j) on the horizontal face
/// x = (i + 1/2)*hx, y = j*hy for j = 0..ny. Faces on the walls carry the
/// normal component and are kept at zero.
class VelocityField {
public:
    explicit VelocityField(const DomainSpec& domain);

    const DomainSpec& domain() const noexcept { return domain_; }

    double u(int i, int j) const { return u_[static_cast<std::size_t>(i) * domain_.ny + j]; }
    double& u(int i, int j) { return u_[static_cast<std::size_t>(i) * domain_.ny + j]; }
    double v(int i, int j) const { return v_[static_cast<std::size_t>(i) * (domain_.ny + 1) + j]; }
    double& v(int i, int j) { return v_[static_cast<std::size_t>(i) * (domain_.ny + 1) + j]; }

    std::span<const double> u_values() const noexcept { return u_; }
    std::span<double> u_values() noexcept { return u_; }
    std::span<const double> v_values() const noexcept { return v_; }
    std::span<double> v_values() noexcept { return v_; }

    bool is_finite() const noexcept;
    double max_abs() const noexcept;
    bool is_zero() const noexcept;
    /// Zeroes the wall-normal faces.
    void clear_wall_normals() noexcept;

    VelocityField& operator+=(const VelocityField& o);
    VelocityField& operator-=(const VelocityField& o);
    VelocityField& operator*=(double s) noexcept;
    /// this += s * o
    VelocityField& axpy(double s, const VelocityField& o);

    friend VelocityField operator+(VelocityField a, const VelocityField& b) { return a += b; }
    friend VelocityField operator-(VelocityField a, const VelocityField& b) { return a -= b; }
    friend VelocityField operator*(double s, VelocityField a) { return a *= s; }
    friend bool operator==(const VelocityField& a, const VelocityField& b) {
        return a.domain_ == b.domain_ && a.u_ == b.u_ && a.v_ == b.v_;
    }

private:
    void check_same_domain(const VelocityField& o) const;

    DomainSpec domain_;
    std::vector<double> u_;
    std::vector<double> v_;
};

struct FieldNorms {
    double l2 = 0.0;
    double h1_seminorm = 0.0;
};

/// Discrete L2 inner product (midpoint rule, weight hx*hy per face).
double inner(const VelocityField& a, const VelocityField& b);
double l2_norm(const VelocityField& f);
double l2_distance(const VelocityField& a, const VelocityField& b);

/// L2 norm and H1 seminorm. The seminorm is the quadratic form of
/// vector_laplacian: |f|_1^2 = -<Laplacian f, f>.
FieldNorms field_norms(const VelocityField& f);

/// MAC divergence per cell. Throws InvalidFieldError on non-finite input.
CellArray divergence(const VelocityField& f);

/// max |div f| * h / max |f|; zero for the zero field.
double relative_divergence(const VelocityField& f);

/// Discrete gradient of a cell scalar onto interior faces.
VelocityField gradient(const CellArray& p, const DomainSpec& domain);

/// Orthogonal projection onto discretely divergence-free fields.
VelocityField leray_project(const VelocityField& f);

/// Five-point vector Laplacian with no-slip walls (odd ghost reflection for
/// the tangential component, zero normal faces).
VelocityField vector_laplacian(const VelocityField& f);

/// Stokes operator L f = -nu * P(Laplacian f).
VelocityField stokes_operator(const VelocityField& f);

/// Random field with independent uniform(-1, 1) values on the interior faces.
VelocityField random_field(const DomainSpec& domain, Stream& rng);

struct StokesBasisOptions {
    int cap = 64;
    int guard_vectors = 8;
    int max_iterations = 400;
    double residual_tolerance = 1e-10;
    std::uint64_t seed = 0x5170C5;
};

/// Smallest discrete Stokes eigenpairs (e_j, lambda_j), lambda nondecreasing,
/// e_j orthonormal in the discrete L2 product.
class StokesBasis {
public:
    StokesBasis(DomainSpec domain, std::vector<VelocityField> modes, std::vector<double> eigenvalues,
                std::vector<double> residuals);

    const DomainSpec& domain() const noexcept { return domain_; }
    int size() const noexcept { return static_cast<int>(modes_.size()); }
    const VelocityField& mode(int j) const { return modes_.at(static_cast<std::size_t>(j)); }
    double eigenvalue(int j) const { return eigenvalues_.at(static_cast<std::size_t>(j)); }
    const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
    /// ||L e_j - lambda_j e_j|| at the time of construction.
    const std::vector<double>& residuals() const noexcept { return residuals_; }

    /// First `count` coefficients <f, e_j>.
    Eigen::VectorXd coefficients(const VelocityField& f, int count) const;
    Eigen::VectorXd coefficients(const VelocityField& f) const { return coefficients(f, size()); }
    /// sum_j c_j e_j
    VelocityField synthesize(const Eigen::VectorXd& c) const;

private:
    DomainSpec domain_;
    std::vector<VelocityField> modes_;
    std::vector<double> eigenvalues_;
    std::vector<double> residuals_;
};

/// Iterative computation by block inverse subspace iteration on the Stokes
/// operator, written in streamfunction coordinates where the divergence-free
/// subspace is parametrised exactly.
StokesBasis stokes_basis(const DomainSpec& domain, int count, const StokesBasisOptions& options = {});

/// Divergence-free field from a node streamfunction psi (interior nodes,
/// row-major (nx-1) x (ny-1)); u = d(psi)/dy, v = -d(psi)/dx.
VelocityField curl_of_streamfunction(const DomainSpec& domain, std::span<const double> psi);

// Snapshot file: "KNSF" magic, u32 format version, u32 nx, u32 ny, f64 nu,
// then the u array and the v array, row-major, little-endian f64.
inline constexpr std::uint32_t kSnapshotVersion = 1;
std::vector<std::uint8_t> encode_snapshot(const VelocityField& f);
VelocityField decode_snapshot(std::span<const std::uint8_t> bytes);
void write_snapshot(const std::filesystem::path& path, const VelocityField& f);
VelocityField read_snapshot(const std::filesystem::path& path);

}  // namespace kickns
