#include "csd/assess.hpp"

#include "csd/common.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace csd {

double merge_scores(const std::vector<double>& rater_scores) {
    if (rater_scores.empty()) throw DomainError("cannot merge an empty score list");
    double mean = 0.0;
    for (double s : rater_scores) mean += s;
    mean /= static_cast<double>(rater_scores.size());
    // Small nudge so that e.g. (3 + 3.5)/2 = 3.25 rounds up despite representation error.
    return std::floor(mean * 2.0 + 0.5 + 1e-9) / 2.0;
}

FeatureVector extract_features(const Article& article, const EmbeddingMatrix& emb, std::uint64_t seed,
                               const FeatureOptions& opts) {
    check_embeddings(article, emb);
    if (opts.samples == 0 || opts.positions == 0 || opts.size_divisions < 2) {
        throw DomainError("feature extraction needs positive samples, positions and at least two size divisions");
    }
    const std::size_t n = article.size();
    BlockScorer scorer(emb, opts.solver);
    Rng rng(seed);

    FeatureVector fv;
    fv.essay_id = article.id();
    fv.values.reserve((opts.size_divisions - 1) * opts.positions);
    for (std::size_t i = 1; i < opts.size_divisions; ++i) {
        const std::size_t k = std::max<std::size_t>(1, i * n / opts.size_divisions);
        std::vector<BlockIndex> blocks;
        if (binomial_capped(static_cast<std::int64_t>(n), static_cast<std::int64_t>(k), opts.samples)) {
            blocks = enumerate_blocks(n, k);
        } else {
            blocks = sample_uniform_blocks(n, k, opts.samples, rng);
            std::sort(blocks.begin(), blocks.end());
            blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
        }
        std::vector<double> scores(blocks.size());
        parallel_for(blocks.size(), opts.jobs, [&](std::size_t b) { scores[b] = scorer.score(blocks[b]); });
        std::sort(scores.begin(), scores.end(), std::greater<>());

        // Decile midpoints: rank ceil(p * M) for p = (2q + 1) / (2P).
        const std::size_t m = scores.size(), p2 = 2 * opts.positions;
        for (std::size_t q = 0; q < opts.positions; ++q) {
            std::size_t rank = ((2 * q + 1) * m + p2 - 1) / p2;
            rank = std::clamp<std::size_t>(rank, 1, m);
            fv.values.push_back(scores[rank - 1]);
        }
    }
    return fv;
}

Split split_dataset(const std::vector<double>& labels, double train_frac, std::uint64_t seed) {
    if (labels.size() < 5) throw DomainError("split needs at least 5 records");
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw DomainError("train fraction must lie in (0, 1)");
    Rng rng(seed);

    std::map<double, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
    std::vector<std::vector<std::size_t>> members;
    for (auto& [label, idx] : groups) {
        std::shuffle(idx.begin(), idx.end(), rng);
        members.push_back(idx);
    }
    const std::size_t g = members.size();
    const double test_frac = 1.0 - train_frac;
    const auto total_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(labels.size())));

    std::vector<std::size_t> quota(g);
    std::vector<double> frac(g);
    std::size_t assigned = 0;
    for (std::size_t l = 0; l < g; ++l) {
        double exact = test_frac * static_cast<double>(members[l].size());
        quota[l] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        frac[l] = exact - static_cast<double>(quota[l]);
        assigned += quota[l];
    }
    std::vector<std::size_t> order(g);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (frac[a] != frac[b]) return frac[a] > frac[b];
        return members[a].size() > members[b].size();
    });
    for (std::size_t r = 0; assigned < total_test && r < 4 * g; ++r) {
        std::size_t l = order[r % g];
        if (quota[l] < members[l].size()) {
            ++quota[l];
            ++assigned;
        }
    }

    auto min_test = [&](std::size_t l) -> std::size_t { return members[l].size() >= 2 ? 1 : 0; };
    auto max_test = [&](std::size_t l) -> std::size_t {
        return members[l].size() >= 2 ? members[l].size() - 1 : members[l].size();
    };
    // Every label with two or more members gets at least one test item...
    for (std::size_t l = 0; l < g; ++l) {
        if (quota[l] >= min_test(l)) continue;
        std::size_t donor = g;
        for (std::size_t d = 0; d < g; ++d) {
            if (d != l && quota[d] > min_test(d) && (donor == g || quota[d] > quota[donor])) donor = d;
        }
        if (donor == g) continue;
        --quota[donor];
        ++quota[l];
    }
    // ...and at least one training item.
    for (std::size_t l = 0; l < g; ++l) {
        if (quota[l] <= max_test(l)) continue;
        std::size_t taker = g;
        for (std::size_t d = 0; d < g; ++d) {
            if (d != l && quota[d] < max_test(d) && (taker == g || quota[d] < quota[taker])) taker = d;
        }
        if (taker == g) continue;
        --quota[l];
        ++quota[taker];
    }

    Split split;
    for (std::size_t l = 0; l < g; ++l) {
        for (std::size_t r = 0; r < members[l].size(); ++r) {
            (r < quota[l] ? split.test : split.train).push_back(members[l][r]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::vector<ToleranceMetrics> evaluate(const std::vector<double>& predictions, const std::vector<double>& labels,
                                       const std::vector<double>& tolerances) {
    if (predictions.size() != labels.size()) throw DomainError("predictions and labels differ in length");
    if (labels.empty()) throw DomainError("nothing to evaluate");
    std::vector<double> classes = labels;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

    // Absorbs representation error in differences of half-point labels.
    constexpr double kSlack = 1e-9;
    std::vector<ToleranceMetrics> out;
    for (double tau : tolerances) {
        ToleranceMetrics m;
        m.tolerance = tau;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (std::abs(predictions[i] - labels[i]) <= tau + kSlack) ++hits;
        m.hit_rate = static_cast<double>(hits) / static_cast<double>(labels.size());

        double f1_sum = 0.0;
        for (double cls : classes) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                const bool pred_near = std::abs(predictions[i] - cls) <= tau + kSlack;
                const bool true_near = std::abs(labels[i] - cls) <= tau + kSlack;
                if (labels[i] == cls) {
                    pred_near ? ++tp : ++fn;
                } else if (pred_near && !true_near) {
                    ++fp;
                }
            }
            const double denom = static_cast<double>(2 * tp + fp + fn);
            f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
        }
        m.macro_f1 = f1_sum / static_cast<double>(classes.size());
        out.push_back(m);
    }
    return out;
}

}  // namespace csd
