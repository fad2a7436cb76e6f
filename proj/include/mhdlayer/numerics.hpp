#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "mhdlayer/core_fields.hpp"

namespace mhdlayer {

using cplx = std::complex<double>;

// Real-to-complex transform of every x-row of an nx-by-nz field (FFTW, estimate plans).
class XTransform {
public:
    XTransform(int nx, int nrows);
    ~XTransform();
    XTransform(const XTransform&) = delete;
    XTransform& operator=(const XTransform&) = delete;

    int nmodes() const { return nx_ / 2 + 1; }
    // out has nrows * nmodes entries, row-major by z.
    void forward(const double* in, cplx* out) const;
    // Normalised inverse; `in` is left untouched.
    void backward(const cplx* in, double* out) const;

private:
    int nx_, nrows_;
    void* fwd_ = nullptr;
    void* bwd_ = nullptr;
};

std::shared_ptr<const XTransform> x_transform(int nx, int nrows);

// Symmetric positive definite band matrix with half-bandwidth p; lower Cholesky factor in place.
class BandedCholesky {
public:
    BandedCholesky() = default;
    BandedCholesky(int n, int p) : n_(n), p_(p), a_(static_cast<size_t>(n) * (p + 1), 0.0) {}
    // entry (i, j) with i >= j, i - j <= p
    double& at(int i, int j) { return a_[static_cast<size_t>(i) * (p_ + 1) + (i - j)]; }
    void add(int i, int j, double v);
    void factor();
    void solve(double* x) const;
    int size() const { return n_; }

private:
    int n_ = 0, p_ = 0;
    std::vector<double> a_;
};

// Solve tridiagonal (a: sub, b: diag, c: super) in place on d.
void solve_tridiagonal(const std::vector<double>& a, const std::vector<double>& b,
                       const std::vector<double>& c, cplx* d, int n);

// Orthogonal projection, in the trapezoid-weighted inner product, onto the kernel of
// divergence(). Component 3 is always pinned to zero on the walls; component 1 is pinned
// unless `tangential_walls` is set (magnetic field without diffusion).
class Projector {
public:
    Projector(GridPtr grid, bool tangential_walls);

    // v <- P v. If phi is given it receives the scalar with v_out = v_in + grad_adj(phi).
    void apply(VectorField& v, ScalarField* phi = nullptr) const;
    // Gradient adjoint to -divergence() on the admissible space: -M^{-1} D^T M p.
    VectorField grad_adj(const ScalarField& p) const;
    bool tangential_walls() const { return tang_; }
    const GridPtr& grid() const { return grid_; }

private:
    GridPtr grid_;
    bool tang_;
    std::shared_ptr<const XTransform> fft_;
    std::vector<BandedCholesky> mode_;  // per Fourier mode with nonzero symbol
    BandedCholesky zero_mode_;          // Dz^T Dz on interior columns, for the pressure of sigma = 0 modes
    std::vector<double> sigma_;
    bool n1(int k) const { return tang_ || (k > 0 && k < grid_->nz - 1); }
};

// Crank-Nicolson style Helmholtz solve (I - a Lap) u = rhs with u = 0 on the walls
// (component carried on interior nodes only). Wall values of rhs are ignored and zeroed.
class HelmholtzSolver {
public:
    HelmholtzSolver(GridPtr grid, double a);
    void solve(ScalarField& f) const;

private:
    GridPtr grid_;
    double a_;
    std::shared_ptr<const XTransform> fft_;
};

}  // namespace mhdlayer
