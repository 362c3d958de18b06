#include "csd/csd2.hpp"

#include "csd/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace csd {

std::size_t csd2_selection_size(std::size_t n) {
    return std::max<std::size_t>(1, (3 * n) / 10);
}

std::vector<double> sentence_scores(const Article& article, const EmbeddingMatrix& emb, const SolverOptions& opts) {
    check_embeddings(article, emb);
    BlockScorer scorer(emb, opts);
    std::vector<double> scores(article.size());
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = scorer.sentence_score(i + 1);
    return scores;
}

Csd2Curve csd2_from_scores(const std::vector<double>& scores) {
    if (scores.empty()) throw DomainError("CSD-2 of an empty article");
    Csd2Curve curve;
    curve.n = scores.size();
    curve.t = csd2_selection_size(curve.n);
    std::vector<std::size_t> order(curve.n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    curve.values.assign(curve.n, 0.0);
    for (std::size_t r = 0; r < curve.t; ++r) curve.values[order[r]] = scores[order[r]];
    return curve;
}

Csd2Curve csd2_curve(const Article& article, const EmbeddingMatrix& emb, const SolverOptions& opts) {
    Csd2Curve curve = csd2_from_scores(sentence_scores(article, emb, opts));
    curve.article_id = article.id();
    return curve;
}

Csd2Grid aggregate_csd2(const std::vector<Csd2Curve>& curves, Statistic stat) {
    if (curves.empty()) throw DomainError("aggregate of zero CSD-2 curves");
    constexpr std::size_t kGrid = 100;
    Csd2Grid grid;
    grid.members = curves.size();
    grid.xs.resize(kGrid);
    grid.ys.resize(kGrid);
    std::vector<double> column(curves.size());
    for (std::size_t j = 1; j <= kGrid; ++j) {
        for (std::size_t c = 0; c < curves.size(); ++c) {
            const auto& cv = curves[c];
            // Nearest position i/n to j/100, with halves rounding up.
            std::size_t i = (2 * j * cv.n + kGrid) / (2 * kGrid);
            i = std::clamp<std::size_t>(i, 1, cv.n);
            column[c] = cv.values[i - 1];
        }
        std::sort(column.begin(), column.end());
        grid.xs[j - 1] = static_cast<double>(j) / 100.0;
        if (stat == Statistic::mean) {
            double s = 0.0;
            for (double v : column) s += v;
            grid.ys[j - 1] = s / static_cast<double>(column.size());
        } else {
            grid.ys[j - 1] = median_of(column);
        }
    }
    return grid;
}

}  // namespace csd
