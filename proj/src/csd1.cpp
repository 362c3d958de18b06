#include "csd/csd1.hpp"

#include "csd/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace csd {

const char* to_string(CurveMode mode) {
    switch (mode) {
        case CurveMode::exact: return "exact";
        case CurveMode::approx: return "approx";
        case CurveMode::aggregate: return "aggregate";
    }
    return "exact";
}

CurveMode curve_mode_from_string(const std::string& s) {
    if (s == "exact") return CurveMode::exact;
    if (s == "approx") return CurveMode::approx;
    if (s == "aggregate") return CurveMode::aggregate;
    throw DomainError("unknown curve mode '" + s + "'");
}

Statistic statistic_from_string(const std::string& s) {
    if (s == "mean") return Statistic::mean;
    if (s == "median") return Statistic::median;
    throw DomainError("unknown statistic '" + s + "' (expected mean or median)");
}

double CsdCurve::value_at(double x) const {
    if (xs.empty()) throw DomainError("empty curve");
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    auto hi = std::lower_bound(xs.begin(), xs.end(), x);
    std::size_t j = static_cast<std::size_t>(hi - xs.begin());
    if (xs[j] == x) return ys[j];
    double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return ys[j - 1] + t * (ys[j] - ys[j - 1]);
}

double median_of(std::vector<double> values) {
    if (values.empty()) throw DomainError("median of an empty list");
    std::sort(values.begin(), values.end());
    std::size_t h = values.size() / 2;
    return values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

CsdCurve make_curve(std::vector<std::pair<BlockIndex, double>> scored, std::size_t n, std::size_t k, CurveMode mode) {
    if (scored.empty()) throw DomainError("cannot build a curve from zero blocks");
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    CsdCurve curve;
    const std::size_t count = scored.size();
    curve.xs.resize(count);
    curve.ys.resize(count);
    for (std::size_t j = 0; j < count; ++j) {
        curve.xs[j] = static_cast<double>(j + 1) / static_cast<double>(count);
        curve.ys[j] = scored[j].second;
    }
    curve.k = k;
    curve.n = n;
    curve.mode = mode;
    curve.sample_count = count;
    return curve;
}

namespace {

std::vector<std::pair<BlockIndex, double>> score_blocks(const BlockScorer& scorer, std::vector<BlockIndex> blocks,
                                                        unsigned jobs) {
    std::vector<std::pair<BlockIndex, double>> scored(blocks.size());
    parallel_for(blocks.size(), jobs, [&](std::size_t i) {
        scored[i].second = scorer.score(blocks[i]);
        scored[i].first = std::move(blocks[i]);
    });
    return scored;
}

}  // namespace

CsdCurve csd1_exact(const Article& article, const EmbeddingMatrix& emb, std::size_t k, const Csd1Options& opts) {
    check_embeddings(article, emb);
    const std::size_t n = article.size();
    if (k < 1 || k > n) throw DomainError("block size must lie in 1..n");
    if (!binomial_capped(static_cast<std::int64_t>(n), static_cast<std::int64_t>(k), opts.enumeration_cap)) {
        throw DomainError("C(" + std::to_string(n) + "," + std::to_string(k) + ") exceeds the enumeration cap of " +
                          std::to_string(opts.enumeration_cap) + " blocks; use the approximation");
    }
    BlockScorer scorer(emb, opts.solver);
    CsdCurve curve = make_curve(score_blocks(scorer, enumerate_blocks(n, k), opts.jobs), n, k, CurveMode::exact);
    curve.article_id = article.id();
    return curve;
}

BlockIndex sample_k_subset(std::size_t n, std::size_t k, Rng& rng) {
    if (k > n) throw DomainError("cannot sample more indices than available");
    std::vector<std::uint32_t> chosen;
    chosen.reserve(k);
    for (std::size_t j = n - k + 1; j <= n; ++j) {
        std::uniform_int_distribution<std::size_t> pick(1, j);
        auto t = static_cast<std::uint32_t>(pick(rng));
        auto pos = std::lower_bound(chosen.begin(), chosen.end(), t);
        if (pos != chosen.end() && *pos == t) {
            chosen.insert(std::lower_bound(chosen.begin(), chosen.end(), static_cast<std::uint32_t>(j)),
                          static_cast<std::uint32_t>(j));
        } else {
            chosen.insert(pos, t);
        }
    }
    return BlockIndex(std::move(chosen));
}

std::vector<BlockIndex> sample_uniform_blocks(std::size_t n, std::size_t k, std::size_t count, Rng& rng) {
    if (k < 1 || k > n) throw DomainError("block size must lie in 1..n");
    std::vector<BlockIndex> out;
    out.reserve(count);
    for (std::size_t d = 0; d < count; ++d) out.push_back(sample_k_subset(n, k, rng));
    return out;
}

std::vector<std::size_t> stratified_quotas(const std::vector<std::size_t>& cluster_sizes, std::size_t k) {
    const std::size_t n = std::accumulate(cluster_sizes.begin(), cluster_sizes.end(), std::size_t{0});
    if (n == 0 || k > n) throw DomainError("invalid cluster sizes for stratified sampling");
    const std::size_t m = cluster_sizes.size();
    std::vector<std::size_t> quota(m);
    std::vector<std::size_t> remainder(m);  // k*n_i mod n, the exact fractional part scaled by n
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < m; ++i) {
        quota[i] = k * cluster_sizes[i] / n;
        remainder[i] = k * cluster_sizes[i] % n;
        assigned += quota[i];
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
        if (cluster_sizes[a] != cluster_sizes[b]) return cluster_sizes[a] > cluster_sizes[b];
        return a < b;
    });
    for (std::size_t r = 0; assigned < k; ++r, ++assigned) ++quota[order[r % m]];
    return quota;
}

std::vector<BlockIndex> sample_stratified_blocks(const ClusterAssignment& clusters, std::size_t k, std::size_t count,
                                                 Rng& rng) {
    const std::size_t m = clusters.cluster_count();
    std::vector<std::vector<std::uint32_t>> members(m);
    for (std::size_t i = 0; i < clusters.labels.size(); ++i) {
        members.at(clusters.labels[i]).push_back(static_cast<std::uint32_t>(i + 1));
    }
    std::vector<std::size_t> sizes(m);
    for (std::size_t c = 0; c < m; ++c) sizes[c] = members[c].size();
    const std::vector<std::size_t> quota = stratified_quotas(sizes, k);

    std::vector<BlockIndex> out;
    out.reserve(count);
    std::vector<std::uint32_t> block;
    for (std::size_t d = 0; d < count; ++d) {
        block.clear();
        for (std::size_t c = 0; c < m; ++c) {
            if (quota[c] == 0) continue;
            BlockIndex within = sample_k_subset(sizes[c], quota[c], rng);
            for (auto pos : within) block.push_back(members[c][pos - 1]);
        }
        std::sort(block.begin(), block.end());
        out.emplace_back(block);
    }
    return out;
}

CsdCurve csd1_approx(const Article& article, const EmbeddingMatrix& emb, std::size_t k, std::uint64_t seed,
                     const Csd1Options& opts) {
    check_embeddings(article, emb);
    const std::size_t n = article.size();
    if (k < 1 || k > n) throw DomainError("block size must lie in 1..n");
    const std::uint64_t budget = opts.n_uniform + opts.n_stratified;
    if (opts.exact_fallback && binomial_capped(static_cast<std::int64_t>(n), static_cast<std::int64_t>(k), budget)) {
        Csd1Options exact = opts;
        exact.enumeration_cap = std::max<std::uint64_t>(exact.enumeration_cap, budget);
        return csd1_exact(article, emb, k, exact);
    }

    Rng rng(seed);
    std::vector<BlockIndex> blocks = sample_uniform_blocks(n, k, opts.n_uniform, rng);
    ClusterAssignment clusters = cluster_ap(similarity_matrix(emb), opts.clustering);
    std::vector<BlockIndex> strat = sample_stratified_blocks(clusters, k, opts.n_stratified, rng);
    blocks.insert(blocks.end(), std::make_move_iterator(strat.begin()), std::make_move_iterator(strat.end()));
    std::sort(blocks.begin(), blocks.end());
    blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());

    BlockScorer scorer(emb, opts.solver);
    CsdCurve curve = make_curve(score_blocks(scorer, std::move(blocks), opts.jobs), n, k, CurveMode::approx);
    curve.seed = seed;
    curve.article_id = article.id();
    return curve;
}

Segments detect_segments(const CsdCurve& curve) {
    if (curve.xs.size() < 10) throw DomainError("segment detection needs at least 10 curve points");
    constexpr std::size_t kGrid = 101;
    std::vector<double> gx(kGrid), gy(kGrid);
    for (std::size_t i = 0; i < kGrid; ++i) {
        gx[i] = static_cast<double>(i) / 100.0;
        gy[i] = curve.value_at(gx[i]);
        // Below the first sample, extend the head linearly instead of clamping
        // so the left chord starts where the curve is heading.
        if (gx[i] < curve.xs[0]) {
            double slope = (curve.ys[1] - curve.ys[0]) / (curve.xs[1] - curve.xs[0]);
            gy[i] = std::clamp(curve.ys[0] + slope * (gx[i] - curve.xs[0]), 0.0, 1.0);
        }
    }
    Segments seg;
    auto [lo, hi] = std::minmax_element(gy.begin(), gy.end());
    if (*hi - *lo < 1e-6) {
        seg.degenerate = true;
        seg.low_confidence = true;
        return seg;
    }
    // Grid point in [first, last] farthest from the chord joining the ends.
    auto knee = [&](std::size_t a, std::size_t b, std::size_t first, std::size_t last) {
        const double dx = gx[b] - gx[a], dy = gy[b] - gy[a];
        const double len = std::hypot(dx, dy);
        std::size_t best = first;
        double best_d = -1.0;
        for (std::size_t i = first; i <= last; ++i) {
            double d = std::abs(dy * (gx[i] - gx[a]) - dx * (gy[i] - gy[a])) / len;
            if (d > best_d) {
                best_d = d;
                best = i;
            }
        }
        return std::pair{best, best_d};
    };
    auto [l, ld] = knee(0, 50, 1, 50);
    auto [r, rd] = knee(50, 100, 51, 99);
    seg.l_end = gx[l];
    seg.r_start = gx[r];
    seg.low_confidence = std::max(ld, rd) < 0.005;
    return seg;
}

CsdCurve aggregate_curves(const std::vector<CsdCurve>& curves, Statistic stat) {
    if (curves.empty()) throw DomainError("aggregate of zero curves");
    constexpr std::size_t kGrid = 100;
    CsdCurve out;
    out.mode = CurveMode::aggregate;
    out.members = curves.size();
    out.sample_count = kGrid;
    out.k = curves.front().k;
    out.n = curves.front().n;
    for (const auto& c : curves) {
        if (c.k != out.k) out.k = 0;
        if (c.n != out.n) out.n = 0;
    }
    out.xs.resize(kGrid);
    out.ys.resize(kGrid);
    std::vector<double> column(curves.size());
    for (std::size_t j = 0; j < kGrid; ++j) {
        const double x = static_cast<double>(j + 1) / 100.0;
        for (std::size_t c = 0; c < curves.size(); ++c) column[c] = curves[c].value_at(x);
        // Sorting first makes the sum independent of input order.
        std::sort(column.begin(), column.end());
        out.xs[j] = x;
        if (stat == Statistic::mean) {
            double s = 0.0;
            for (double v : column) s += v;
            out.ys[j] = s / static_cast<double>(column.size());
        } else {
            out.ys[j] = median_of(column);
        }
    }
    return out;
}

ScrambledArticle make_scrambled_article(const std::vector<Article>& corpus, std::size_t m, Rng& rng) {
    if (m == 0) throw DomainError("scrambled article needs at least one source");
    if (corpus.size() < m) {
        throw DomainError("corpus has " + std::to_string(corpus.size()) + " articles; " + std::to_string(m) +
                          " are required");
    }
    BlockIndex picked = sample_k_subset(corpus.size(), m, rng);
    std::vector<std::pair<std::size_t, std::size_t>> sources;
    for (auto idx : picked) {
        const Article& src = corpus[idx - 1];
        std::uniform_int_distribution<std::size_t> pick(1, src.size());
        sources.emplace_back(idx - 1, pick(rng));
    }
    std::shuffle(sources.begin(), sources.end(), rng);

    std::vector<std::string> sentences;
    std::string id = "scrambled:";
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const Article& src = corpus[sources[i].first];
        sentences.push_back(src.sentence(sources[i].second));
        if (i) id += ',';
        id += src.id() + "#" + std::to_string(sources[i].second);
    }
    return {Article(std::move(id), std::move(sentences)), std::move(sources)};
}

}  // namespace csd
