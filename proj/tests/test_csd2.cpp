#include "doctest.h"

#include "csd/common.hpp"
#include "csd/csd2.hpp"
#include "support/synth.hpp"

#include <algorithm>
#include <cmath>

using namespace csd;

namespace {

std::size_t nonzero(const Csd2Curve& c) {
    return static_cast<std::size_t>(std::count_if(c.values.begin(), c.values.end(), [](double v) { return v != 0.0; }));
}

// Score-maximal size-t index set, lexicographically smallest among ties.
std::vector<std::uint32_t> brute_force_selection(const std::vector<double>& scores, std::size_t t) {
    std::vector<std::uint32_t> best;
    double best_sum = -1.0;
    for (const auto& block : enumerate_blocks(scores.size(), t)) {
        // Sum in descending score order so equal multisets give equal sums.
        std::vector<double> picked;
        for (auto i : block) picked.push_back(scores[i - 1]);
        std::sort(picked.rbegin(), picked.rend());
        double sum = 0.0;
        for (double v : picked) sum += v;
        if (sum > best_sum) {
            best_sum = sum;
            best = block.indices();
        }
    }
    return best;
}

Csd2Curve from_values(std::vector<double> values) {
    Csd2Curve c;
    c.n = values.size();
    c.values = std::move(values);
    c.t = nonzero(c);
    return c;
}

}  // namespace

TEST_CASE("selection size") {
    CHECK(csd2_selection_size(10) == 3);
    CHECK(csd2_selection_size(2) == 1);
    CHECK(csd2_selection_size(1) == 1);
    CHECK(csd2_selection_size(33) == 9);
    CHECK(csd2_selection_size(100) == 30);
}

TEST_CASE("sentence scores") {
    auto single = sentence_scores(synth::article("a", 1), synth::from_rows("a", {{0, 1}}));
    CHECK(single == std::vector<double>{1.0});

    auto same = sentence_scores(synth::article("s", 5), synth::from_rows("s", std::vector<std::vector<double>>(5, {0.6, 0.8})));
    for (double v : same) CHECK(v == same[0]);

    // e1, e2, (e1+e2)/sqrt2: the 1 x 3 transport sends 1/3 to each sentence.
    const double h = 1.0 / std::sqrt(2.0);
    auto three = sentence_scores(synth::article("t", 3), synth::from_rows("t", {{1, 0}, {0, 1}, {h, h}}));
    const double c45 = (1.0 - h) / 2.0;
    CHECK(three[0] == doctest::Approx(1.0 - (0.0 + 0.5 + c45) / 3.0));
    CHECK(three[1] == doctest::Approx(1.0 - (0.5 + 0.0 + c45) / 3.0));
    CHECK(three[2] == doctest::Approx(1.0 - (2.0 * c45) / 3.0));
}

TEST_CASE("top-t retention and the tie rule") {
    auto c = csd2_from_scores({0.5, 0.9, 0.1, 0.7, 0.3, 0.8, 0.2, 0.6, 0.4, 0.05});
    CHECK(c.t == 3);
    CHECK(nonzero(c) == 3);
    CHECK(c.values[1] == 0.9);
    CHECK(c.values[5] == 0.8);
    CHECK(c.values[3] == 0.7);
    CHECK(c.x(10) == 1.0);

    auto two = csd2_from_scores({0.4, 0.6});
    CHECK(two.values == std::vector<double>{0.0, 0.6});

    auto tied = csd2_from_scores(std::vector<double>(10, 0.8));
    CHECK(tied.values == std::vector<double>{0.8, 0.8, 0.8, 0, 0, 0, 0, 0, 0, 0});
    CHECK_THROWS_AS(csd2_from_scores({}), DomainError);
}

TEST_CASE("selection matches brute force for every n <= 12") {
    synth::Rng rng(31);
    std::uniform_int_distribution<int> level(1, 4);  // coarse levels force ties
    for (std::size_t n = 1; n <= 12; ++n) {
        for (int trial = 0; trial < 15; ++trial) {
            std::vector<double> scores(n);
            for (auto& s : scores) s = 0.2 * level(rng);
            auto c = csd2_from_scores(scores);
            const std::size_t t = std::max<std::size_t>(1, (3 * n) / 10);
            REQUIRE(nonzero(c) == t);
            std::vector<std::uint32_t> kept;
            for (std::size_t i = 0; i < n; ++i)
                if (c.values[i] != 0.0) kept.push_back(static_cast<std::uint32_t>(i + 1));
            CHECK(kept == brute_force_selection(scores, t));
            for (auto i : kept) CHECK(c.values[i - 1] == scores[i - 1]);
        }
    }
}

TEST_CASE("csd2 curve of an embedded article") {
    synth::Rng rng(32);
    auto emb = synth::topical_embeddings("e", 10, 12, 3, rng);
    auto c = csd2_curve(synth::article("e", 10), emb);
    CHECK(c.article_id == "e");
    CHECK(nonzero(c) == 3);
    auto scores = sentence_scores(synth::article("e", 10), emb);
    double kept_min = 1.0, dropped_max = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        if (c.values[i] != 0.0)
            kept_min = std::min(kept_min, scores[i]);
        else
            dropped_max = std::max(dropped_max, scores[i]);
    }
    CHECK(kept_min >= dropped_max);
}

TEST_CASE("aggregation onto the percent grid") {
    std::vector<double> v(100, 0.0);
    for (std::size_t i = 0; i < 100; i += 7) v[i] = 0.5 + 0.001 * static_cast<double>(i);
    auto single = from_values(v);
    auto g = aggregate_csd2({single}, Statistic::mean);
    CHECK(g.members == 1);
    CHECK(g.ys == v);
    CHECK(aggregate_csd2({single, single, single}, Statistic::median).ys == v);
    CHECK(aggregate_csd2({single, single}, Statistic::mean).ys == v);

    std::vector<double> left(100, 0.0), right(100, 0.0);
    for (std::size_t i = 0; i < 30; ++i) left[i] = 0.8;
    for (std::size_t i = 70; i < 100; ++i) right[i] = 0.6;
    auto mean = aggregate_csd2({from_values(left), from_values(right)}, Statistic::mean);
    for (std::size_t j = 0; j < 100; ++j) CHECK(mean.ys[j] == doctest::Approx((left[j] + right[j]) / 2.0));

    // n = 4: grid point j/100 maps to the nearest i/4, halves upward.
    auto short_curve = from_values({0.1, 0.2, 0.3, 0.4});
    auto sg = aggregate_csd2({short_curve}, Statistic::mean);
    CHECK(sg.ys[0] == 0.1);    // 0.01 -> 1/4 (clamped)
    CHECK(sg.ys[36] == 0.1);   // 0.37 -> 1/4
    CHECK(sg.ys[37] == 0.2);   // 0.38 -> 2/4 (0.375 rounds up)
    CHECK(sg.ys[99] == 0.4);

    CHECK_THROWS_AS(aggregate_csd2({}, Statistic::mean), DomainError);
}

TEST_CASE("front-loaded articles give a decreasing mean curve") {
    synth::Rng rng(33);
    std::vector<Csd2Curve> curves;
    for (int a = 0; a < 40; ++a) {
        std::uniform_int_distribution<std::size_t> size(12, 30);
        const std::size_t n = size(rng);
        std::vector<double> profile(n);
        for (std::size_t i = 0; i < n; ++i) profile[i] = 0.95 - 0.7 * static_cast<double>(i) / static_cast<double>(n - 1);
        auto topic = synth::random_unit(24, rng);
        auto emb = synth::profiled_embeddings("n" + std::to_string(a), topic, profile, rng);
        curves.push_back(csd2_curve(synth::article("n" + std::to_string(a), n), emb));
    }
    auto g = aggregate_csd2(curves, Statistic::mean);
    auto third = [&](std::size_t from, std::size_t to) {
        double s = 0.0;
        for (std::size_t j = from; j < to; ++j) s += g.ys[j];
        return s / static_cast<double>(to - from);
    };
    CHECK(third(0, 33) > third(33, 66));
    CHECK(third(33, 66) >= third(66, 100));
    CHECK(third(0, 33) > 0.3);
}
