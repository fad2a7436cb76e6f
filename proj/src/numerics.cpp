#include "mhdlayer/numerics.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace mhdlayer {

namespace {
std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

XTransform::XTransform(int nx, int nrows) : nx_(nx), nrows_(nrows) {
    const int nm = nx / 2 + 1;
    std::lock_guard<std::mutex> lock(fftw_mutex());
    double* rin = fftw_alloc_real(static_cast<size_t>(nx) * nrows);
    fftw_complex* cout = fftw_alloc_complex(static_cast<size_t>(nm) * nrows);
    int n[1] = {nx};
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_many_dft_r2c(1, n, nrows, rin, nullptr, 1, nx, cout, nullptr, 1, nm, flags);
    bwd_ = fftw_plan_many_dft_c2r(1, n, nrows, cout, nullptr, 1, nm, rin, nullptr, 1, nx, flags);
    fftw_free(rin);
    fftw_free(cout);
    if (!fwd_ || !bwd_) throw std::runtime_error("FFTW plan creation failed");
}

XTransform::~XTransform() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

void XTransform::forward(const double* in, cplx* out) const {
    fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_), const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
}

void XTransform::backward(const cplx* in, double* out) const {
    std::vector<cplx> tmp(in, in + static_cast<size_t>(nmodes()) * nrows_);
    fftw_execute_dft_c2r(static_cast<fftw_plan>(bwd_), reinterpret_cast<fftw_complex*>(tmp.data()), out);
    const double s = 1.0 / nx_;
    const size_t n = static_cast<size_t>(nx_) * nrows_;
    for (size_t i = 0; i < n; ++i) out[i] *= s;
}

std::shared_ptr<const XTransform> x_transform(int nx, int nrows) {
    static std::mutex cache_mutex;
    static std::map<std::pair<int, int>, std::shared_ptr<const XTransform>> cache;
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto& slot = cache[{nx, nrows}];
    if (!slot) slot = std::make_shared<XTransform>(nx, nrows);
    return slot;
}

void BandedCholesky::add(int i, int j, double v) {
    if (i < j) std::swap(i, j);
    at(i, j) += v;
}

void BandedCholesky::factor() {
    for (int j = 0; j < n_; ++j) {
        double d = at(j, j);
        for (int k = std::max(0, j - p_); k < j; ++k) d -= at(j, k) * at(j, k);
        if (!(d > 0.0)) throw std::runtime_error("banded Cholesky: matrix not positive definite");
        const double ljj = std::sqrt(d);
        at(j, j) = ljj;
        for (int i = j + 1; i <= std::min(n_ - 1, j + p_); ++i) {
            double s = at(i, j);
            for (int k = std::max(0, i - p_); k < j; ++k) s -= at(i, k) * at(j, k);
            at(i, j) = s / ljj;
        }
    }
}

void BandedCholesky::solve(double* x) const {
    auto L = [&](int i, int j) { return a_[static_cast<size_t>(i) * (p_ + 1) + (i - j)]; };
    for (int i = 0; i < n_; ++i) {
        double s = x[i];
        for (int k = std::max(0, i - p_); k < i; ++k) s -= L(i, k) * x[k];
        x[i] = s / L(i, i);
    }
    for (int i = n_ - 1; i >= 0; --i) {
        double s = x[i];
        for (int k = i + 1; k <= std::min(n_ - 1, i + p_); ++k) s -= L(k, i) * x[k];
        x[i] = s / L(i, i);
    }
}

void solve_tridiagonal(const std::vector<double>& a, const std::vector<double>& b,
                       const std::vector<double>& c, cplx* d, int n) {
    std::vector<double> cp(n);
    cp[0] = c[0] / b[0];
    d[0] /= b[0];
    for (int i = 1; i < n; ++i) {
        const double m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for (int i = n - 2; i >= 0; --i) d[i] -= cp[i] * d[i + 1];
}

namespace {

// Nonzero entries of the z-derivative restricted to interior columns, grouped by column.
std::vector<std::vector<std::pair<int, double>>> column_entries(const GridSpec& g) {
    std::vector<std::vector<std::pair<int, double>>> cols(g.nz);
    for (int k = 0; k < g.nz; ++k)
        for (int i = 0; i < 3; ++i) {
            const int l = g.dz_start[k] + i;
            const double c = g.dz_coef[k][i];
            if (l <= 0 || l >= g.nz - 1 || c == 0.0) continue;
            cols[l].push_back({k, c});
        }
    return cols;
}

}  // namespace

Projector::Projector(GridPtr grid, bool tangential_walls)
    : grid_(std::move(grid)), tang_(tangential_walls), fft_(x_transform(grid_->nx, grid_->nz)) {
    const auto& g = *grid_;
    const int nz = g.nz;
    const int nm = g.nx / 2 + 1;
    const auto cols = column_entries(g);

    int p = 0;
    for (int l = 1; l < nz - 1; ++l)
        for (auto& a : cols[l])
            for (auto& b : cols[l]) p = std::max(p, std::abs(a.first - b.first));

    BandedCholesky base(nz, p);
    for (int l = 1; l < nz - 1; ++l)
        for (auto& a : cols[l])
            for (auto& b : cols[l])
                if (a.first >= b.first) base.add(a.first, b.first, a.second * b.second / g.wz[l]);

    sigma_.assign(nm, 0.0);
    mode_.assign(nm, BandedCholesky());
    for (int m = 1; m < nm; ++m) {
        if (2 * m == g.nx) continue;
        sigma_[m] = std::sin(m * g.dx) / g.dx;
        BandedCholesky a = base;
        for (int k = 0; k < nz; ++k)
            if (n1(k)) a.add(k, k, sigma_[m] * sigma_[m] / g.wz[k]);
        a.factor();
        mode_[m] = std::move(a);
    }

    // Dz^T Dz over interior columns (size nz - 2)
    BandedCholesky zm(nz - 2, 3);
    std::vector<std::vector<std::pair<int, double>>> rows(nz);
    for (int l = 1; l < nz - 1; ++l)
        for (auto& e : cols[l]) rows[e.first].push_back({l, e.second});
    for (int k = 0; k < nz; ++k)
        for (auto& a : rows[k])
            for (auto& b : rows[k])
                if (a.first >= b.first) zm.add(a.first - 1, b.first - 1, a.second * b.second);
    zm.factor();
    zero_mode_ = std::move(zm);
}

void Projector::apply(VectorField& v, ScalarField* phi) const {
    const auto& g = *grid_;
    const int nz = g.nz;
    const int nm = fft_->nmodes();
    std::vector<cplx> u1(static_cast<size_t>(nm) * nz), u3(u1.size()), lam(u1.size(), cplx(0.0));
    fft_->forward(v.f1.data().data(), u1.data());
    fft_->forward(v.f3.data().data(), u3.data());
    auto U1 = [&](int k, int m) -> cplx& { return u1[static_cast<size_t>(k) * nm + m]; };
    auto U3 = [&](int k, int m) -> cplx& { return u3[static_cast<size_t>(k) * nm + m]; };
    auto LAM = [&](int k, int m) -> cplx& { return lam[static_cast<size_t>(k) * nm + m]; };

    std::vector<double> re(nz), im(nz);
    for (int m = 0; m < nm; ++m) {
        const bool zero_symbol = (m == 0) || (2 * m == g.nx);
        if (zero_symbol) {
            // constraint reduces to Dz u3 = 0, whose only solution is u3 = 0
            std::vector<double> r(nz - 2), s(nz - 2);
            for (int l = 1; l < nz - 1; ++l) {
                r[l - 1] = g.wz[l] * U3(l, m).real();
                s[l - 1] = g.wz[l] * U3(l, m).imag();
            }
            zero_mode_.solve(r.data());
            zero_mode_.solve(s.data());
            for (int k = 0; k < nz; ++k) {
                cplx acc(0.0);
                for (int i = 0; i < 3; ++i) {
                    const int l = g.dz_start[k] + i;
                    if (l <= 0 || l >= nz - 1) continue;
                    acc += g.dz_coef[k][i] * cplx(r[l - 1], s[l - 1]);
                }
                LAM(k, m) = acc;
            }
            for (int l = 0; l < nz; ++l) U3(l, m) = 0.0;
            continue;
        }
        const double sg = sigma_[m];
        // one step of iterative refinement keeps the residual divergence at round-off
        for (int pass = 0; pass < 2; ++pass) {
            for (int k = 0; k < nz; ++k) {
                cplx r = n1(k) ? cplx(0.0, sg) * U1(k, m) : cplx(0.0);
                for (int i = 0; i < 3; ++i) {
                    const int l = g.dz_start[k] + i;
                    if (l <= 0 || l >= nz - 1) continue;
                    r += g.dz_coef[k][i] * U3(l, m);
                }
                re[k] = r.real();
                im[k] = r.imag();
            }
            mode_[m].solve(re.data());
            mode_[m].solve(im.data());
            for (int k = 0; k < nz; ++k) {
                const cplx dl(re[k], im[k]);
                LAM(k, m) += dl;
                if (n1(k)) U1(k, m) += cplx(0.0, sg) * dl / g.wz[k];
                for (int i = 0; i < 3; ++i) {
                    const int l = g.dz_start[k] + i;
                    if (l <= 0 || l >= nz - 1) continue;
                    U3(l, m) -= g.dz_coef[k][i] * dl / g.wz[l];
                }
            }
        }
    }
    fft_->backward(u1.data(), v.f1.data().data());
    fft_->backward(u3.data(), v.f3.data().data());
    for (int j = 0; j < g.nx; ++j) {
        v.f3(j, 0) = 0.0;
        v.f3(j, nz - 1) = 0.0;
        if (!tang_) {
            v.f1(j, 0) = 0.0;
            v.f1(j, nz - 1) = 0.0;
        }
    }
    if (phi) {
        for (int k = 0; k < nz; ++k)
            for (int m = 0; m < nm; ++m) LAM(k, m) /= g.wz[k];
        if (!phi->valid()) *phi = ScalarField(grid_);
        fft_->backward(lam.data(), phi->data().data());
    }
}

VectorField Projector::grad_adj(const ScalarField& p) const {
    const auto& g = *grid_;
    VectorField out(grid_);
    out.f1 = ddx(p);
    for (int j = 0; j < g.nx; ++j)
        for (int k = 0; k < g.nz; ++k)
            if (!n1(k)) out.f1(j, k) = 0.0;
    for (int k = 0; k < g.nz; ++k)
        for (int i = 0; i < 3; ++i) {
            const int l = g.dz_start[k] + i;
            if (l <= 0 || l >= g.nz - 1) continue;
            const double c = -g.dz_coef[k][i] * g.wz[k] / g.wz[l];
            for (int j = 0; j < g.nx; ++j) out.f3(j, l) += c * p(j, k);
        }
    return out;
}

HelmholtzSolver::HelmholtzSolver(GridPtr grid, double a)
    : grid_(std::move(grid)), a_(a), fft_(x_transform(grid_->nx, grid_->nz)) {}

void HelmholtzSolver::solve(ScalarField& f) const {
    const auto& g = *grid_;
    const int nz = g.nz, nm = fft_->nmodes(), n = nz - 2;
    std::vector<cplx> F(static_cast<size_t>(nm) * nz);
    fft_->forward(f.data().data(), F.data());
    std::vector<double> A(n), B(n), C(n);
    std::vector<cplx> d(n);
    for (int m = 0; m < nm; ++m) {
        const double s = std::sin(0.5 * m * g.dx);
        const double lx = -4.0 * s * s / (g.dx * g.dx);
        for (int i = 0; i < n; ++i) {
            const int k = i + 1;
            const auto& c = g.lap_coef[k];
            A[i] = -a_ * c[0];
            B[i] = 1.0 - a_ * lx - a_ * c[1];
            C[i] = -a_ * c[2];
            d[i] = F[static_cast<size_t>(k) * nm + m];
        }
        solve_tridiagonal(A, B, C, d.data(), n);
        F[m] = 0.0;
        F[static_cast<size_t>(nz - 1) * nm + m] = 0.0;
        for (int i = 0; i < n; ++i) F[static_cast<size_t>(i + 1) * nm + m] = d[i];
    }
    fft_->backward(F.data(), f.data().data());
    for (int j = 0; j < g.nx; ++j) {
        f(j, 0) = 0.0;
        f(j, nz - 1) = 0.0;
    }
}

}  // namespace mhdlayer
