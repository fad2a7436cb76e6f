#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

namespace mhdlayer {

// Channel [0, 2π) x [0, h]: periodic in x, walls at z = 0 and z = h.
struct GridSpec {
    int nx = 0;
    int nz = 0;
    double h = 1.0;
    double stretch = 0.0;
    double dx = 0.0;
    std::vector<double> z;   // wall-normal nodes, z[0] = 0, z[nz-1] = h
    std::vector<double> wz;  // trapezoid weights in z

    // First-derivative stencil in z: three coefficients starting at dz_start[k].
    // Central on interior nodes, one-sided second order on the two walls.
    std::vector<int> dz_start;
    std::vector<std::array<double, 3>> dz_coef;

    // Three-point second derivative on interior nodes (k-1, k, k+1).
    std::vector<std::array<double, 3>> lap_coef;

    double x(int j) const { return dx * j; }
    double dz_min() const;
    double dz_max() const;
    // Local spacing used by the CFL estimate.
    double dz_local(int k) const;
};

using GridPtr = std::shared_ptr<const GridSpec>;

GridPtr build_grid(int nx, int nz, double h, double stretch);

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(GridPtr grid, double fill = 0.0);

    const GridSpec& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    bool valid() const { return static_cast<bool>(grid_); }

    // j: x index, k: z index. Storage is z-major so each z-level is a contiguous x-row.
    double& operator()(int j, int k) { return v_[static_cast<size_t>(k) * nx_ + j]; }
    double operator()(int j, int k) const { return v_[static_cast<size_t>(k) * nx_ + j]; }

    std::vector<double>& data() { return v_; }
    const std::vector<double>& data() const { return v_; }
    size_t size() const { return v_.size(); }

    ScalarField& operator+=(const ScalarField& o);
    ScalarField& operator-=(const ScalarField& o);
    ScalarField& operator*=(double c);

private:
    GridPtr grid_;
    int nx_ = 0;
    std::vector<double> v_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double c, ScalarField a);

struct VectorField {
    ScalarField f1;  // tangential
    ScalarField f3;  // wall-normal

    VectorField() = default;
    explicit VectorField(GridPtr grid, double fill = 0.0) : f1(grid, fill), f3(grid, fill) {}
    VectorField(ScalarField a, ScalarField b);

    const GridSpec& grid() const { return f1.grid(); }
    const GridPtr& grid_ptr() const { return f1.grid_ptr(); }

    VectorField& operator+=(const VectorField& o);
    VectorField& operator-=(const VectorField& o);
    VectorField& operator*=(double c);
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(double c, VectorField a);

struct NormSet {
    double l2 = 0.0;
    double linf = 0.0;
    double l2_dz = 0.0;
    double l2_z_weighted = 0.0;
    double linf_z2_weighted = 0.0;
};

enum class Wall { lower, upper };
enum class WallRule { one_sided, zero };

ScalarField sample(const GridPtr& grid, const std::function<double(double, double)>& f);

ScalarField ddx(const ScalarField& s);
ScalarField ddz(const ScalarField& s);
ScalarField d2dx2(const ScalarField& s);
ScalarField d2dz2(const ScalarField& s, WallRule rule = WallRule::one_sided);

ScalarField divergence(const VectorField& v);
VectorField gradient(const ScalarField& s);
ScalarField laplacian(const ScalarField& s, WallRule rule = WallRule::one_sided);

// Trapezoid quadrature over the channel.
double integrate(const ScalarField& s);
double inner(const ScalarField& a, const ScalarField& b);
double inner(const VectorField& a, const VectorField& b);
double max_abs(const ScalarField& s);

NormSet norms(const ScalarField& s);
NormSet norms(const VectorField& v);

// ||f/d||_{L2} / ||d_z f||_{L2}, d the distance to the named wall.
double hardy_ratio(const ScalarField& f, Wall wall);

// Stream-function velocity (d_z psi, -d_x psi) built with the same stencils as divergence().
VectorField curl_of_stream(const ScalarField& psi);

// Weights for the derivative of order m at x0 from nodes xs (Fornberg's recursion).
std::vector<double> fd_weights(double x0, const std::vector<double>& xs, int m);

}  // namespace mhdlayer
