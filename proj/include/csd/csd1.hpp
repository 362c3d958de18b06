#pragma once

// Content-significance distribution of the first kind: the sorted
// MoverScores of all (or sampled) size-k sub-text blocks against their
// article, on a rank-normalized x axis.

#include "csd/affinity.hpp"
#include "csd/emd.hpp"
#include "csd/textmodel.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace csd {

using Rng = std::mt19937_64;

enum class CurveMode { exact, approx, aggregate };

const char* to_string(CurveMode mode);
CurveMode curve_mode_from_string(const std::string& s);

struct CsdCurve {
    std::vector<double> xs;  // strictly increasing in (0, 1]
    std::vector<double> ys;  // non-increasing in [0, 1]
    std::size_t k = 0;
    std::size_t n = 0;
    CurveMode mode = CurveMode::exact;
    std::size_t sample_count = 0;
    std::optional<std::uint64_t> seed;
    std::size_t members = 1;  // curves averaged into an aggregate
    std::string article_id;

    // Linear interpolation; x below xs.front() clamps to ys.front().
    double value_at(double x) const;
};

struct Segments {
    double l_end = 1.0 / 3.0;
    double r_start = 2.0 / 3.0;
    bool degenerate = false;      // flat curve
    bool low_confidence = false;  // knee distance below 0.005
};

enum class Statistic { mean, median };
Statistic statistic_from_string(const std::string& s);

struct Csd1Options {
    std::uint64_t enumeration_cap = 200000;
    std::size_t n_uniform = 5000;
    std::size_t n_stratified = 5000;
    // Enumerate instead of sampling when C(n,k) fits in the sample budget.
    bool exact_fallback = true;
    SolverOptions solver{};
    ApOptions clustering{};
    unsigned jobs = 1;
};

// Builds a curve from scored blocks: sorted by descending score, ties by
// lexicographic block order, xs = rank / count.
CsdCurve make_curve(std::vector<std::pair<BlockIndex, double>> scored, std::size_t n, std::size_t k, CurveMode mode);

// Throws DomainError when C(n,k) exceeds opts.enumeration_cap.
CsdCurve csd1_exact(const Article& article, const EmbeddingMatrix& emb, std::size_t k, const Csd1Options& opts = {});

// Floyd's algorithm; sorted 1-based indices.
BlockIndex sample_k_subset(std::size_t n, std::size_t k, Rng& rng);

std::vector<BlockIndex> sample_uniform_blocks(std::size_t n, std::size_t k, std::size_t count, Rng& rng);

// Per-cluster sentence quotas for a block of size k: floor(k*n_i/n) plus the
// remainder by largest fractional part (ties: larger cluster, then lower id).
std::vector<std::size_t> stratified_quotas(const std::vector<std::size_t>& cluster_sizes, std::size_t k);

std::vector<BlockIndex> sample_stratified_blocks(const ClusterAssignment& clusters, std::size_t k, std::size_t count,
                                                 Rng& rng);

CsdCurve csd1_approx(const Article& article, const EmbeddingMatrix& emb, std::size_t k, std::uint64_t seed,
                     const Csd1Options& opts = {});

Segments detect_segments(const CsdCurve& curve);

CsdCurve aggregate_curves(const std::vector<CsdCurve>& curves, Statistic stat);

struct ScrambledArticle {
    Article article;
    // (corpus position, 1-based sentence index) of each sentence, in order
    std::vector<std::pair<std::size_t, std::size_t>> sources;
};

ScrambledArticle make_scrambled_article(const std::vector<Article>& corpus, std::size_t m, Rng& rng);

// Median of a non-empty list (mean of the two middle values for even sizes).
double median_of(std::vector<double> values);

}  // namespace csd
