#pragma once

// Regularized incomplete beta function and the linearly transformed beta
// CCDF curve LC_x(a, b | alpha, beta) = a * (1 - I_x(alpha, beta)) + b,
// with least-squares fitting of its four parameters to CSD-1 curves.

#include "csd/csd1.hpp"

#include <span>

namespace csd {

struct LcParams {
    double a = 0.0;
    double b = 0.0;
    double alpha = 0.5;
    double beta = 0.5;

    // Throws DomainError unless a, b >= 0, a + b <= 1 and alpha, beta > 0.
    void validate() const;
};

struct LcFit {
    LcParams params;
    double rmse = 0.0;
};

// I_x(alpha, beta) by continued fraction, using the reflection
// I_x(a, b) = 1 - I_{1-x}(b, a) when x > (a + 1) / (a + b + 2).
double reg_inc_beta(double x, double alpha, double beta);

double beta_ccdf(double x, double alpha, double beta);

double lc_transform(double x, const LcParams& params);

struct FitOptions {
    double shape_min = 0.05;
    double shape_max = 0.95;
};

LcFit fit_lc(std::span<const double> xs, std::span<const double> ys, const FitOptions& opts = {});
LcFit fit_lc(const CsdCurve& curve, const FitOptions& opts = {});

}  // namespace csd
