#include "doctest.h"

#include "csd/common.hpp"
#include "csd/emd.hpp"
#include "oracles/lp_oracle.hpp"
#include "support/synth.hpp"

#include <cmath>

using namespace csd;

namespace {

std::vector<double> random_weights(std::size_t n, synth::Rng& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += (x = u(rng));
    for (auto& x : w) x /= s;
    return w;
}

CostMatrix random_cost(std::size_t m, std::size_t n, synth::Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CostMatrix c(m, n);
    for (auto& x : c.data) x = u(rng);
    return c;
}

void check_marginals(const TransportPlan& plan, const std::vector<double>& wx, const std::vector<double>& wy) {
    for (std::size_t i = 0; i < plan.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < plan.cols; ++j) {
            CHECK(plan.at(i, j) >= 0.0);
            s += plan.at(i, j);
        }
        CHECK(std::abs(s - wx[i]) <= 1e-8);
    }
    for (std::size_t j = 0; j < plan.cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < plan.rows; ++i) s += plan.at(i, j);
        CHECK(std::abs(s - wy[j]) <= 1e-8);
    }
}

}  // namespace

TEST_CASE("ground cost of unit vectors") {
    std::vector<double> x{1, 0, 0}, y{-1, 0, 0}, z{0, 1, 0};
    CHECK(ground_cost(x, x) == 0.0);
    CHECK(ground_cost(x, y) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ground_cost(x, z) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(ground_cost(x, std::vector<double>{1, 0}), DomainError);
}

TEST_CASE("cost_matrix rejects mismatched dimensions") {
    WeightedPointCloud a(2, {1, 0}, {1.0});
    WeightedPointCloud b(3, {1, 0, 0}, {1.0});
    CHECK_THROWS_AS(cost_matrix(a, b), DomainError);
}

TEST_CASE("point clouds validate weights") {
    CHECK_THROWS_AS(WeightedPointCloud(2, {}, {}), DomainError);
    CHECK_THROWS_AS(WeightedPointCloud(2, {1, 0, 0, 1}, {0.7, 0.7}), DomainError);
    CHECK_THROWS_AS(WeightedPointCloud(2, {1, 0, 0, 1}, {1.5, -0.5}), DomainError);
    CHECK_NOTHROW(WeightedPointCloud(2, {1, 0, 0, 1}, {0.5, 0.5}));
}

TEST_CASE("exact EMD: perfect and permutation matches") {
    std::vector<double> w{0.2, 0.3, 0.5};
    CostMatrix diag(3, 3, 0.7);
    for (int i = 0; i < 3; ++i) diag(i, i) = 0.0;
    auto plan = solve_emd_exact(w, w, diag);
    CHECK(plan.cost == 0.0);
    for (int i = 0; i < 3; ++i) CHECK(plan.at(i, i) == doctest::Approx(w[i]));
    check_marginals(plan, w, w);

    std::vector<double> h{0.5, 0.5};
    CostMatrix perm(2, 2);
    perm(0, 1) = perm(1, 0) = 0.0;
    perm(0, 0) = perm(1, 1) = 1.0;
    CHECK(solve_emd_exact(h, h, perm).cost == 0.0);
}

TEST_CASE("exact EMD matches the LP oracle on random instances") {
    synth::Rng rng(7);
    for (int t = 0; t < 60; ++t) {
        std::uniform_int_distribution<std::size_t> size(1, 6);
        std::size_t m = size(rng), n = size(rng);
        auto wx = random_weights(m, rng), wy = random_weights(n, rng);
        auto c = random_cost(m, n, rng);
        auto plan = solve_emd_exact(wx, wy, c);
        CHECK(plan.cost == doctest::Approx(oracle::transport_lp(wx, wy, c.data)).epsilon(1e-9));
        check_marginals(plan, wx, wy);
    }
}

TEST_CASE("exact EMD: one source against three targets is the mean cost") {
    // 1 x 3 transportation: all mass leaves the single source, 1/3 per target.
    CostMatrix c(1, 3);
    c(0, 0) = 0.1;
    c(0, 1) = 0.4;
    c(0, 2) = 0.7;
    std::vector<double> one{1.0}, third(3, 1.0 / 3.0);
    CHECK(solve_emd_exact(one, third, c).cost == doctest::Approx(0.4));
}

TEST_CASE("exact EMD drops zero-weight rows and columns") {
    std::vector<double> wx{0.5, 0.0, 0.5}, wy{0.0, 1.0};
    CostMatrix c(3, 2, 0.3);
    c(1, 1) = 0.0;
    auto plan = solve_emd_exact(wx, wy, c);
    CHECK(plan.cost == doctest::Approx(0.3));
    CHECK(plan.at(1, 1) == 0.0);
    check_marginals(plan, wx, wy);
    CHECK_THROWS_AS(solve_emd_exact(std::vector<double>{}, wy, CostMatrix(0, 2)), DomainError);
}

TEST_CASE("exact EMD handles degenerate ties") {
    // Uniform weights and constant costs make every feasible plan optimal.
    std::vector<double> a(5, 0.2), b(4, 0.25);
    CostMatrix c(5, 4, 0.5);
    auto plan = solve_emd_exact(a, b, c);
    CHECK(plan.cost == doctest::Approx(0.5));
    check_marginals(plan, a, b);
}

TEST_CASE("sinkhorn approximates the exact cost") {
    std::vector<double> w{0.2, 0.3, 0.5};
    CostMatrix diag(3, 3, 0.7);
    for (int i = 0; i < 3; ++i) diag(i, i) = 0.0;
    auto same = solve_emd_sinkhorn(w, w, diag, 0.01, 1000);
    CHECK(same.cost <= 1e-3);

    std::vector<double> h{0.5, 0.5};
    CostMatrix perm(2, 2);
    perm(0, 0) = perm(1, 1) = 1.0;
    CHECK(solve_emd_sinkhorn(h, h, perm, 0.01, 1000).cost <= 0.01);

    synth::Rng rng(11);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::vector<double>> xs, ys;
        for (int i = 0; i < 5; ++i) xs.push_back(synth::random_unit(8, rng));
        for (int i = 0; i < 5; ++i) ys.push_back(synth::random_unit(8, rng));
        auto ex = synth::from_rows("x", xs), ey = synth::from_rows("y", ys);
        auto cx = WeightedPointCloud::uniform(ex), cy = WeightedPointCloud::uniform(ey);
        auto c = cost_matrix(cx, cy);
        double exact = solve_emd_exact(cx.weights(), cy.weights(), c).cost;
        auto approx = solve_emd_sinkhorn(cx.weights(), cy.weights(), c, 0.01, 1000);
        CHECK(std::abs(approx.cost - exact) <= 0.05 * exact);
    }
}

TEST_CASE("sinkhorn flags non-convergence instead of throwing") {
    std::vector<double> a{0.3, 0.7}, b{0.6, 0.4};
    CostMatrix c(2, 2);
    c(0, 1) = 1.0;
    c(1, 0) = 0.2;
    auto r = solve_emd_sinkhorn(a, b, c, 0.001, 1);
    CHECK(r.iterations == 1);
    CHECK_THROWS_AS(solve_emd_sinkhorn(a, b, c, 0.0, 10), DomainError);
}

TEST_CASE("mover_score range and identities") {
    synth::Rng rng(3);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 4; ++i) rows.push_back(synth::random_unit(6, rng));
    auto emb = synth::from_rows("a", rows);
    auto cloud = WeightedPointCloud::uniform(emb);
    CHECK(mover_score(cloud, cloud, {SolverMode::exact}) == 1.0);

    WeightedPointCloud north(2, {0, 1}, {1.0}), south(2, {0, -1}, {1.0});
    CHECK(mover_score(north, south) == doctest::Approx(0.0).epsilon(1e-15));

    for (int t = 0; t < 20; ++t) {
        std::vector<std::vector<double>> xr, yr;
        for (int i = 0; i < 3; ++i) xr.push_back(synth::random_unit(5, rng));
        for (int i = 0; i < 4; ++i) yr.push_back(synth::random_unit(5, rng));
        auto x = WeightedPointCloud::uniform(synth::from_rows("x", xr));
        auto y = WeightedPointCloud::uniform(synth::from_rows("y", yr));
        double xy = mover_score(x, y), yx = mover_score(y, x);
        CHECK(xy >= 0.0);
        CHECK(xy <= 1.0);
        CHECK(xy == doctest::Approx(yx).epsilon(1e-12));
    }
}

TEST_CASE("mover_score of one sentence against a three-sentence article") {
    // Orthonormal sentences e1, e2, e3: ground costs from e1 are 0, 1/2, 1/2,
    // so EMD = (0 + 1/2 + 1/2) / 3 = 1/3.
    auto article = synth::from_rows("a", {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    BlockScorer scorer(article);
    CHECK(scorer.sentence_score(1) == doctest::Approx(2.0 / 3.0));
    auto block = WeightedPointCloud(3, {1, 0, 0}, {1.0});
    CHECK(mover_score(block, WeightedPointCloud::uniform(article)) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("adding article sentences to a block never lowers its score (orthogonal fixtures)") {
    for (std::size_t n = 2; n <= 6; ++n) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> e(n, 0.0);
            e[i] = 1.0;
            rows.push_back(e);
        }
        BlockScorer scorer(synth::from_rows("o", rows));
        for (std::size_t k = 1; k < n; ++k) {
            for (const auto& block : enumerate_blocks(n, k)) {
                double base = scorer.score(block);
                for (std::uint32_t extra = 1; extra <= n; ++extra) {
                    if (std::find(block.begin(), block.end(), extra) != block.end()) continue;
                    auto idx = block.indices();
                    idx.insert(std::lower_bound(idx.begin(), idx.end(), extra), extra);
                    CHECK(scorer.score(BlockIndex(idx)) >= base - 1e-12);
                }
            }
        }
    }
}

TEST_CASE("exact mode is deterministic bit for bit") {
    synth::Rng rng(5);
    auto emb = synth::topical_embeddings("d", 12, 16, 3, rng);
    BlockScorer a(emb), b(emb);
    for (const auto& block : enumerate_blocks(12, 4)) CHECK(a.score(block) == b.score(block));
}
