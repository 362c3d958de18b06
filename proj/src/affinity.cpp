#include "csd/affinity.hpp"

#include "csd/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace csd {

namespace {

ClusterAssignment assign_to_exemplars(const SimilarityMatrix& s, std::vector<std::size_t> exemplars) {
    ClusterAssignment out;
    out.exemplars = std::move(exemplars);
    out.labels.assign(s.n, 0);
    out.sizes.assign(out.exemplars.size(), 0);
    for (std::size_t i = 0; i < s.n; ++i) {
        std::size_t best = 0;
        auto own = std::find(out.exemplars.begin(), out.exemplars.end(), i);
        if (own != out.exemplars.end()) {
            best = static_cast<std::size_t>(own - out.exemplars.begin());
        } else {
            double best_s = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < out.exemplars.size(); ++c) {
                double v = s(i, out.exemplars[c]);
                if (v > best_s) {
                    best_s = v;
                    best = c;
                }
            }
        }
        out.labels[i] = best;
        ++out.sizes[best];
    }
    return out;
}

std::size_t max_total_similarity_point(const SimilarityMatrix& s) {
    std::size_t best = 0;
    double best_total = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.n; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < s.n; ++j)
            if (j != i) total += s(i, j);
        if (total > best_total) {
            best_total = total;
            best = i;
        }
    }
    return best;
}

}  // namespace

SimilarityMatrix similarity_matrix(const EmbeddingMatrix& emb) {
    SimilarityMatrix s;
    s.n = emb.rows();
    if (s.n == 0) throw DomainError("similarity matrix of an empty embedding set");
    s.data.assign(s.n * s.n, 0.0);
    for (std::size_t i = 0; i < s.n; ++i) {
        auto a = emb.row(i);
        for (std::size_t j = i + 1; j < s.n; ++j) {
            auto b = emb.row(j);
            double d2 = 0.0;
            for (std::size_t d = 0; d < a.size(); ++d) {
                double diff = a[d] - b[d];
                d2 += diff * diff;
            }
            s(i, j) = -d2;
            s(j, i) = -d2;
        }
    }
    double pref = median_off_diagonal(s);
    for (std::size_t i = 0; i < s.n; ++i) s(i, i) = pref;
    return s;
}

double median_off_diagonal(const SimilarityMatrix& s) {
    if (s.n < 2) return 0.0;
    std::vector<double> off;
    off.reserve(s.n * (s.n - 1));
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.n; ++j)
            if (i != j) off.push_back(s(i, j));
    std::sort(off.begin(), off.end());
    std::size_t h = off.size() / 2;
    return off.size() % 2 ? off[h] : 0.5 * (off[h - 1] + off[h]);
}

ClusterAssignment cluster_ap(const SimilarityMatrix& s, const ApOptions& opts) {
    const std::size_t n = s.n;
    if (n == 0 || s.data.size() != n * n) throw DomainError("similarity matrix must be square and non-empty");
    if (!(opts.damping >= 0.5 && opts.damping < 1.0)) throw DomainError("damping must lie in [0.5, 1)");
    if (opts.max_iter == 0 || opts.conv_window == 0) throw DomainError("max_iter and conv_window must be positive");

    if (n == 1) {
        auto out = assign_to_exemplars(s, {0});
        out.converged = true;
        return out;
    }

    // Degenerate input: every off-diagonal similarity equal.  Message passing
    // stays at its all-zero fixed point here, so resolve it directly.
    {
        const double first = s(0, 1);
        bool all_equal = true, prefs_equal = true;
        for (std::size_t i = 0; i < n && all_equal; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j && s(i, j) != first) {
                    all_equal = false;
                    break;
                }
        for (std::size_t i = 1; i < n; ++i)
            if (s(i, i) != s(0, 0)) prefs_equal = false;
        if (all_equal && prefs_equal) {
            ClusterAssignment out;
            if (first == 0.0 || s(0, 0) < first) {
                // Coincident points, or self-preference below the shared similarity.
                out = assign_to_exemplars(s, {0});
            } else {
                std::vector<std::size_t> all(n);
                for (std::size_t i = 0; i < n; ++i) all[i] = i;
                out = assign_to_exemplars(s, std::move(all));
            }
            out.converged = true;
            return out;
        }
    }

    const double lambda = opts.damping;
    std::vector<double> r(n * n, 0.0), a(n * n, 0.0);
    std::vector<char> is_exemplar(n, 0), prev(n, 0);
    std::size_t stable = 0;
    ClusterAssignment out;

    for (std::size_t it = 1; it <= opts.max_iter; ++it) {
        // Responsibilities.
        for (std::size_t i = 0; i < n; ++i) {
            double first = -std::numeric_limits<double>::infinity(), second = first;
            std::size_t arg = 0;
            for (std::size_t k = 0; k < n; ++k) {
                double v = a[i * n + k] + s(i, k);
                if (v > first) {
                    second = first;
                    first = v;
                    arg = k;
                } else if (v > second) {
                    second = v;
                }
            }
            for (std::size_t k = 0; k < n; ++k) {
                double fresh = s(i, k) - (k == arg ? second : first);
                r[i * n + k] = lambda * r[i * n + k] + (1.0 - lambda) * fresh;
            }
        }
        // Availabilities.
        for (std::size_t k = 0; k < n; ++k) {
            double pos_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (i != k) pos_sum += std::max(0.0, r[i * n + k]);
            for (std::size_t i = 0; i < n; ++i) {
                double fresh;
                if (i == k) {
                    fresh = pos_sum;
                } else {
                    fresh = std::min(0.0, r[k * n + k] + pos_sum - std::max(0.0, r[i * n + k]));
                }
                a[i * n + k] = lambda * a[i * n + k] + (1.0 - lambda) * fresh;
            }
        }

        bool any = false;
        for (std::size_t k = 0; k < n; ++k) {
            is_exemplar[k] = (r[k * n + k] + a[k * n + k]) > 0.0;
            any = any || is_exemplar[k];
        }
        stable = (is_exemplar == prev) ? stable + 1 : 0;
        prev = is_exemplar;
        out.iterations = it;
        if (any && stable >= opts.conv_window) {
            out.converged = true;
            break;
        }
    }

    std::vector<std::size_t> exemplars;
    for (std::size_t k = 0; k < n; ++k)
        if (is_exemplar[k]) exemplars.push_back(k);

    const std::size_t iterations = out.iterations;
    const bool converged = out.converged;
    if (exemplars.empty()) {
        out = assign_to_exemplars(s, {max_total_similarity_point(s)});
        out.fallback = true;
    } else {
        out = assign_to_exemplars(s, std::move(exemplars));
    }
    out.iterations = iterations;
    out.converged = converged;
    return out;
}

}  // namespace csd
