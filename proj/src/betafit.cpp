#include "csd/betafit.hpp"

#include "csd/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace csd {

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double x, double a, double b) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    return h;
}

double lower_tail(double x, double a, double b) {
    const double log_front = a * std::log(x) + b * std::log1p(-x) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
    return std::exp(log_front) * beta_continued_fraction(x, a, b) / a;
}

struct LinearFit {
    double a = 0.0;
    double b = 0.0;
    double sse = std::numeric_limits<double>::infinity();
};

// Best a, b >= 0 with a + b <= 1 for y ~ a*c + b.  The objective is a convex
// quadratic over a triangle: the optimum is the unconstrained solution when
// feasible, otherwise the best clamped optimum along one of the three edges.
LinearFit fit_linear(std::span<const double> c, std::span<const double> y) {
    const double n = static_cast<double>(c.size());
    double sc = 0, sy = 0, scc = 0, scy = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        sc += c[i];
        sy += y[i];
        scc += c[i] * c[i];
        scy += c[i] * y[i];
    }
    auto sse = [&](double a, double b) {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            double r = a * c[i] + b - y[i];
            s += r * r;
        }
        return s;
    };
    LinearFit best;
    auto consider = [&](double a, double b) {
        if (!(a >= 0.0 && b >= 0.0 && a + b <= 1.0 + 1e-15)) return;
        double v = sse(a, b);
        if (v < best.sse) best = {a, b, v};
    };
    const double det = n * scc - sc * sc;
    if (det > 1e-14 * std::max(1.0, n * scc)) {
        consider((n * scy - sc * sy) / det, (scc * sy - sc * scy) / det);
    }
    // a = 0
    consider(0.0, std::clamp(sy / n, 0.0, 1.0));
    // b = 0
    consider(scc > 0.0 ? std::clamp(scy / scc, 0.0, 1.0) : 0.0, 0.0);
    // a + b = 1: y - 1 = a (c - 1)
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        num += (c[i] - 1.0) * (y[i] - 1.0);
        den += (c[i] - 1.0) * (c[i] - 1.0);
    }
    double a_edge = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
    consider(a_edge, 1.0 - a_edge);
    return best;
}

}  // namespace

void LcParams::validate() const {
    if (!(a >= 0.0 && b >= 0.0)) throw DomainError("LC parameters require a >= 0 and b >= 0");
    if (a + b > 1.0 + 1e-12) throw DomainError("LC parameters require a + b <= 1");
    if (!(alpha > 0.0 && beta > 0.0)) throw DomainError("LC shape parameters must be positive");
}

double reg_inc_beta(double x, double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("incomplete beta requires alpha > 0 and beta > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta requires x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    // Closed forms when a shape is 1; I_x(1, 1) = x exactly.
    if (beta == 1.0) return std::pow(x, alpha);
    if (alpha == 1.0) return -std::expm1(beta * std::log1p(-x));
    if (x > (alpha + 1.0) / (alpha + beta + 2.0)) return 1.0 - lower_tail(1.0 - x, beta, alpha);
    return lower_tail(x, alpha, beta);
}

double beta_ccdf(double x, double alpha, double beta) {
    return 1.0 - reg_inc_beta(x, alpha, beta);
}

double lc_transform(double x, const LcParams& params) {
    params.validate();
    return params.a * beta_ccdf(x, params.alpha, params.beta) + params.b;
}

LcFit fit_lc(std::span<const double> xs, std::span<const double> ys, const FitOptions& opts) {
    if (xs.size() != ys.size()) throw DomainError("fit_lc: xs and ys differ in length");
    if (xs.size() < 10) throw DomainError("fit_lc needs at least 10 points");
    const double lo = opts.shape_min, hi = opts.shape_max;

    std::vector<double> c(xs.size());
    auto profile = [&](double alpha, double beta) {
        for (std::size_t i = 0; i < xs.size(); ++i) c[i] = beta_ccdf(xs[i], alpha, beta);
        return fit_linear(c, ys);
    };
    auto objective = [&](const std::array<double, 2>& p) {
        return profile(std::clamp(p[0], lo, hi), std::clamp(p[1], lo, hi)).sse;
    };

    // Coarse grid; keep the three best seeds.
    struct Seed {
        double alpha, beta, sse;
    };
    std::vector<Seed> seeds;
    for (int ia = 1; ia <= 9; ++ia) {
        for (int ib = 1; ib <= 9; ++ib) {
            double alpha = std::clamp(ia / 10.0, lo, hi), beta = std::clamp(ib / 10.0, lo, hi);
            seeds.push_back({alpha, beta, profile(alpha, beta).sse});
        }
    }
    std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& x, const Seed& y) { return x.sse < y.sse; });
    seeds.resize(std::min<std::size_t>(3, seeds.size()));

    std::array<double, 2> best_p{seeds.front().alpha, seeds.front().beta};
    double best_v = seeds.front().sse;
    for (const Seed& seed : seeds) {
        // Nelder-Mead over (alpha, beta); a and b are profiled out exactly.
        std::array<std::array<double, 2>, 3> simplex{{{seed.alpha, seed.beta},
                                                      {seed.alpha + 0.05, seed.beta},
                                                      {seed.alpha, seed.beta + 0.05}}};
        std::array<double, 3> val{};
        for (int v = 0; v < 3; ++v) {
            for (auto& coord : simplex[v]) coord = std::clamp(coord, lo, hi);
            val[v] = objective(simplex[v]);
        }
        for (int iter = 0; iter < 400; ++iter) {
            std::array<int, 3> ord{0, 1, 2};
            std::sort(ord.begin(), ord.end(), [&](int x, int y) { return val[x] < val[y]; });
            const int b0 = ord[0], mid = ord[1], worst = ord[2];
            double size = std::max(std::abs(simplex[worst][0] - simplex[b0][0]) + std::abs(simplex[worst][1] - simplex[b0][1]),
                                   std::abs(simplex[mid][0] - simplex[b0][0]) + std::abs(simplex[mid][1] - simplex[b0][1]));
            if (size < 1e-9) break;
            std::array<double, 2> centroid{(simplex[b0][0] + simplex[mid][0]) / 2, (simplex[b0][1] + simplex[mid][1]) / 2};
            auto along = [&](double t) {
                std::array<double, 2> p{centroid[0] + t * (simplex[worst][0] - centroid[0]),
                                        centroid[1] + t * (simplex[worst][1] - centroid[1])};
                p[0] = std::clamp(p[0], lo, hi);
                p[1] = std::clamp(p[1], lo, hi);
                return p;
            };
            auto refl = along(-1.0);
            double fr = objective(refl);
            if (fr < val[b0]) {
                auto exp = along(-2.0);
                double fe = objective(exp);
                if (fe < fr) {
                    simplex[worst] = exp;
                    val[worst] = fe;
                } else {
                    simplex[worst] = refl;
                    val[worst] = fr;
                }
            } else if (fr < val[mid]) {
                simplex[worst] = refl;
                val[worst] = fr;
            } else {
                auto con = fr < val[worst] ? along(-0.5) : along(0.5);
                double fc = objective(con);
                if (fc < std::min(fr, val[worst])) {
                    simplex[worst] = con;
                    val[worst] = fc;
                } else {
                    for (int v : {mid, worst}) {
                        simplex[v][0] = simplex[b0][0] + 0.5 * (simplex[v][0] - simplex[b0][0]);
                        simplex[v][1] = simplex[b0][1] + 0.5 * (simplex[v][1] - simplex[b0][1]);
                        val[v] = objective(simplex[v]);
                    }
                }
            }
        }
        for (int v = 0; v < 3; ++v) {
            if (val[v] < best_v) {
                best_v = val[v];
                best_p = simplex[v];
            }
        }
    }

    LcFit fit;
    fit.params.alpha = std::clamp(best_p[0], lo, hi);
    fit.params.beta = std::clamp(best_p[1], lo, hi);
    LinearFit lin = profile(fit.params.alpha, fit.params.beta);
    fit.params.a = lin.a;
    fit.params.b = lin.b;
    fit.rmse = std::sqrt(lin.sse / static_cast<double>(xs.size()));
    return fit;
}

LcFit fit_lc(const CsdCurve& curve, const FitOptions& opts) {
    return fit_lc(curve.xs, curve.ys, opts);
}

}  // namespace csd
