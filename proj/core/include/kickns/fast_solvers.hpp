#pragma once

#include <span>
#include <vector>

namespace kickns {

/// Direct solvers for the constant-coefficient operators of the MAC grid on
/// the unit square: a real trigonometric transform along one axis and a
/// tridiagonal elimination along the other.
///   - cell Laplacian with Neumann walls (pressure): cosine transform in y;
///   - u-face Laplacian: odd ghost walls in y (sine II), Dirichlet rows in x;
///   - v-face Laplacian: odd ghost walls in x (sine II), Dirichlet rows in y.
/// One instance per grid size, shared and immutable; execution is thread-safe.
class FastSolvers {
public:
    static const FastSolvers& get(int nx, int ny);

    FastSolvers(int nx, int ny);
    ~FastSolvers();
    FastSolvers(const FastSolvers&) = delete;
    FastSolvers& operator=(const FastSolvers&) = delete;

    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }

    /// Solves L p = rhs in place for the zero-mean p (rhs must have zero mean;
    /// its mean component is discarded).
    void solve_pressure(std::span<double> rhs_to_p) const;

    /// Solves (I - alpha * Laplacian) x = rhs in place on the interior u faces,
    /// arranged row-major (nx - 1) x ny.
    void helmholtz_u(std::span<double> rhs_to_x, double alpha) const;

    /// Same for the interior v faces, row-major nx x (ny - 1).
    void helmholtz_v(std::span<double> rhs_to_x, double alpha) const;

private:
    struct Plans;
    int nx_;
    int ny_;
    Plans* plans_;
    // Eigenvalues of the negative 1D second-difference operators.
    std::vector<double> cos_y_;   // Neumann cells
    std::vector<double> dst2_x_;  // odd ghost walls
    std::vector<double> dst2_y_;
};

}  // namespace kickns
