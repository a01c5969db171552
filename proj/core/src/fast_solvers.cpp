#include "kickns/fast_solvers.hpp"
#include "kickns/version.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

namespace kickns {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<double> second_difference_eigs(int count, int denom, int offset, double h) {
    // 4/h^2 sin^2(pi (k + offset) / (2 denom))
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double s = std::sin(std::numbers::pi * (k + offset) / (2.0 * denom));
        out[static_cast<std::size_t>(k)] = 4.0 * s * s / (h * h);
    }
    return out;
}

// Solves rows x 'lines' independent constant-off-diagonal tridiagonal
// systems  off*x[r-1] + diag[l]*x[r] + off*x[r+1] = b[r]  (x[-1] = x[rows] = 0)
// in place. Element (r, l) lives at data[r * row_stride + l * line_stride].
// The first and last diagonal entries get end_extra added.
void tridiagonal_lines(double* data, int rows, int lines, std::ptrdiff_t row_stride, std::ptrdiff_t line_stride,
                       const std::vector<double>& diag, double off, double end_extra, std::vector<double>& scratch) {
    scratch.assign(static_cast<std::size_t>(rows) * lines, 0.0);
    auto at = [&](int r, int l) -> double& { return data[r * row_stride + l * line_stride]; };
    auto cp = [&](int r, int l) -> double& { return scratch[static_cast<std::size_t>(r) * lines + l]; };
    for (int l = 0; l < lines; ++l) {
        double denom = diag[static_cast<std::size_t>(l)] + end_extra;
        cp(0, l) = off / denom;
        at(0, l) /= denom;
    }
    for (int r = 1; r < rows; ++r) {
        const double extra = r == rows - 1 ? end_extra : 0.0;
        for (int l = 0; l < lines; ++l) {
            const double denom = diag[static_cast<std::size_t>(l)] + extra - off * cp(r - 1, l);
            cp(r, l) = off / denom;
            at(r, l) = (at(r, l) - off * at(r - 1, l)) / denom;
        }
    }
    for (int r = rows - 2; r >= 0; --r)
        for (int l = 0; l < lines; ++l) at(r, l) -= cp(r, l) * at(r + 1, l);
}

}  // namespace

struct FastSolvers::Plans {
    fftw_plan cos_fwd = nullptr, cos_inv = nullptr;
    fftw_plan u_fwd = nullptr, u_inv = nullptr;
    fftw_plan v_fwd = nullptr, v_inv = nullptr;
};

const FastSolvers& FastSolvers::get(int nx, int ny) {
    static std::mutex registry_mutex;
    static std::map<std::pair<int, int>, std::unique_ptr<FastSolvers>> registry;
    std::lock_guard lock(registry_mutex);
    auto& slot = registry[{nx, ny}];
    if (!slot) slot = std::make_unique<FastSolvers>(nx, ny);
    return *slot;
}

FastSolvers::FastSolvers(int nx, int ny) : nx_(nx), ny_(ny), plans_(new Plans) {
    cos_y_ = second_difference_eigs(ny, ny, 0, 1.0 / ny);
    dst2_x_ = second_difference_eigs(nx, nx, 1, 1.0 / nx);
    dst2_y_ = second_difference_eigs(ny, ny, 1, 1.0 / ny);

    std::lock_guard lock(planner_mutex());
    const unsigned flags = FFTW_MEASURE | FFTW_UNALIGNED;
    std::vector<double> buf(static_cast<std::size_t>(nx + 1) * (ny + 1));
    double* b = buf.data();
    const fftw_r2r_kind redft10 = FFTW_REDFT10, redft01 = FFTW_REDFT01;
    const fftw_r2r_kind rodft10 = FFTW_RODFT10, rodft01 = FFTW_RODFT01;
    // Cell rows: nx transforms of length ny, contiguous.
    plans_->cos_fwd = fftw_plan_many_r2r(1, &ny, nx, b, nullptr, 1, ny, b, nullptr, 1, ny, &redft10, flags);
    plans_->cos_inv = fftw_plan_many_r2r(1, &ny, nx, b, nullptr, 1, ny, b, nullptr, 1, ny, &redft01, flags);
    // Interior u faces: nx - 1 rows of length ny, contiguous.
    plans_->u_fwd = fftw_plan_many_r2r(1, &ny, nx - 1, b, nullptr, 1, ny, b, nullptr, 1, ny, &rodft10, flags);
    plans_->u_inv = fftw_plan_many_r2r(1, &ny, nx - 1, b, nullptr, 1, ny, b, nullptr, 1, ny, &rodft01, flags);
    // Interior v faces: ny - 1 columns of length nx with stride ny - 1.
    const int sv = ny - 1;
    plans_->v_fwd = fftw_plan_many_r2r(1, &nx, sv, b, nullptr, sv, 1, b, nullptr, sv, 1, &rodft10, flags);
    plans_->v_inv = fftw_plan_many_r2r(1, &nx, sv, b, nullptr, sv, 1, b, nullptr, sv, 1, &rodft01, flags);
}

FastSolvers::~FastSolvers() {
    std::lock_guard lock(planner_mutex());
    for (fftw_plan p : {plans_->cos_fwd, plans_->cos_inv, plans_->u_fwd, plans_->u_inv, plans_->v_fwd, plans_->v_inv})
        if (p) fftw_destroy_plan(p);
    delete plans_;
}

void FastSolvers::solve_pressure(std::span<double> data) const {
    double* d = data.data();
    fftw_execute_r2r(plans_->cos_fwd, d, d);
    const double ihx2 = static_cast<double>(nx_) * nx_;
    const double scale = 1.0 / (2.0 * ny_);
    // Mode 0 in y: Neumann second difference in x, singular; integrate the
    // flux form p_{i+1} - p_i = hx^2 sum_{m<=i} r_m and remove the mean.
    {
        double flux = 0.0, p = 0.0, mean = 0.0;
        std::vector<double> col(static_cast<std::size_t>(nx_));
        for (int i = 0; i < nx_; ++i) {
            col[static_cast<std::size_t>(i)] = p;
            mean += p;
            flux += d[static_cast<std::size_t>(i) * ny_];
            p += flux / ihx2;
        }
        mean /= nx_;
        for (int i = 0; i < nx_; ++i) d[static_cast<std::size_t>(i) * ny_] = (col[static_cast<std::size_t>(i)] - mean) * scale;
    }
    // Remaining modes: (Dxx - lambda_k) p = r, solved as (lambda_k - Dxx) p = -r.
    std::vector<double> diag(static_cast<std::size_t>(ny_ - 1));
    for (int k = 1; k < ny_; ++k) diag[static_cast<std::size_t>(k - 1)] = cos_y_[static_cast<std::size_t>(k)] + 2.0 * ihx2;
    for (int i = 0; i < nx_; ++i)
        for (int k = 1; k < ny_; ++k) d[static_cast<std::size_t>(i) * ny_ + k] *= -scale;
    std::vector<double> scratch;
    tridiagonal_lines(d + 1, nx_, ny_ - 1, ny_, 1, diag, -ihx2, -ihx2, scratch);
    fftw_execute_r2r(plans_->cos_inv, d, d);
}

void FastSolvers::helmholtz_u(std::span<double> data, double alpha) const {
    double* d = data.data();
    fftw_execute_r2r(plans_->u_fwd, d, d);
    const double ihx2 = static_cast<double>(nx_) * nx_;
    const double scale = 1.0 / (2.0 * ny_);
    for (std::size_t k = 0; k < data.size(); ++k) d[k] *= scale;
    std::vector<double> diag(static_cast<std::size_t>(ny_));
    for (int k = 0; k < ny_; ++k) diag[static_cast<std::size_t>(k)] = 1.0 + alpha * (dst2_y_[static_cast<std::size_t>(k)] + 2.0 * ihx2);
    std::vector<double> scratch;
    tridiagonal_lines(d, nx_ - 1, ny_, ny_, 1, diag, -alpha * ihx2, 0.0, scratch);
    fftw_execute_r2r(plans_->u_inv, d, d);
}

void FastSolvers::helmholtz_v(std::span<double> data, double alpha) const {
    double* d = data.data();
    fftw_execute_r2r(plans_->v_fwd, d, d);
    const double ihy2 = static_cast<double>(ny_) * ny_;
    const double scale = 1.0 / (2.0 * nx_);
    for (std::size_t k = 0; k < data.size(); ++k) d[k] *= scale;
    std::vector<double> diag(static_cast<std::size_t>(nx_));
    for (int k = 0; k < nx_; ++k) diag[static_cast<std::size_t>(k)] = 1.0 + alpha * (dst2_x_[static_cast<std::size_t>(k)] + 2.0 * ihy2);
    // Rows are the y index (stride 1), lines the x modes (stride ny - 1).
    std::vector<double> scratch;
    tridiagonal_lines(d, ny_ - 1, nx_, 1, ny_ - 1, diag, -alpha * ihy2, 0.0, scratch);
    fftw_execute_r2r(plans_->v_inv, d, d);
}

}  // namespace kickns

namespace kickns {

const char* fft_library_version() noexcept { return fftw_version; }

}  // namespace kickns
