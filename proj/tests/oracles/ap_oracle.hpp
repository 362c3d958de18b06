#pragma once

// Reference Affinity Propagation written straight from the published
// matrix-form update rules (responsibility, then availability via clipped
// column sums), used to cross-check the library's exemplar sets.

#include <algorithm>
#include <cstddef>
#include <vector>

namespace oracle {

inline std::vector<std::size_t> ap_exemplars(const std::vector<std::vector<double>>& s, double damping,
                                             std::size_t iterations) {
    const std::size_t n = s.size();
    using Mat = std::vector<std::vector<double>>;
    Mat r(n, std::vector<double>(n, 0.0)), a = r;
    for (std::size_t it = 0; it < iterations; ++it) {
        Mat as(n, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) as[i][k] = a[i][k] + s[i][k];
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                double m = -1e300;
                for (std::size_t kk = 0; kk < n; ++kk)
                    if (kk != k) m = std::max(m, as[i][kk]);
                r[i][k] = damping * r[i][k] + (1 - damping) * (s[i][k] - m);
            }
        }
        Mat rp(n, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) rp[i][k] = (i == k) ? r[i][k] : std::max(0.0, r[i][k]);
        for (std::size_t k = 0; k < n; ++k) {
            double col = 0.0;
            for (std::size_t i = 0; i < n; ++i) col += rp[i][k];
            for (std::size_t i = 0; i < n; ++i) {
                double v = col - rp[i][k];
                double fresh = (i == k) ? v : std::min(0.0, v);
                a[i][k] = damping * a[i][k] + (1 - damping) * fresh;
            }
        }
    }
    std::vector<std::size_t> ex;
    for (std::size_t k = 0; k < n; ++k)
        if (r[k][k] + a[k][k] > 0) ex.push_back(k);
    return ex;
}

}  // namespace oracle
