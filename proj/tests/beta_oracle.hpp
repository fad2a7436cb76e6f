#pragma once

#include <algorithm>
#include <cmath>

namespace testsupport {

// Second, independent transcription of the eight bound formulas.
struct Betas {
    double b0, bb0, b1, bb1, b2, bb2, b3, b4;
};

inline Betas betas_oracle(double e, double a, double b, double k) {
    const double r = std::sqrt(e), s = a + b, m = std::min(a, b), D = (a - b) * (a - b);
    Betas o{};
    o.b0 = std::pow(e, k - 1) + a * a + b * b + (a - e) * (a - e) / (a * r) + (b - e) * (b - e) / (b * r) +
           D / (e * r * s);
    o.bb0 = D / (s * m) * o.b0 + std::pow(e, k) + D / (r * s);
    o.b1 = a * a + b * b + D / (e * s * s * m) * o.b0 + std::pow(e, k - 1) / s + D / (e * r * s * s) +
           (a - e) * (a - e) / (a * r) + (b - e) * (b - e) / (a * r);
    o.bb1 = D + D / (s * m) * o.b1 + e * e / m * o.b1 + D / (r * s);
    o.b2 = D / (e * s * s * m) * o.b0 + a * a + b * b + std::pow(e, k - 1) / s + D / (e * r * s * s);
    o.bb2 = std::pow(e, k) + D / (s * m) * o.b2 + e * e / m * o.b2 + D / (r * s);
    o.b3 = std::pow(e, k) + (o.b1 * o.bb2 + o.b2 * o.bb1) / (e * e * s);
    const double inv = 1 / a + 1 / b;
    o.b4 = std::pow(e, k) + o.b3 / e + std::pow(e, k - 1) + D / (e * s * m) * o.b2 + D / (e * r * s) +
           inv * o.b1 * o.b2 / m + (o.b1 + o.b2) * inv + o.b0 / m;
    return o;
}

}  // namespace testsupport
