#include "doctest.h"

#include "csd/affinity.hpp"
#include "csd/common.hpp"
#include "oracles/ap_oracle.hpp"
#include "support/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace csd;

namespace {

std::vector<std::vector<double>> as_rows(const SimilarityMatrix& s) {
    std::vector<std::vector<double>> m(s.n, std::vector<double>(s.n));
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.n; ++j) m[i][j] = s(i, j);
    return m;
}

void check_assignment(const SimilarityMatrix& s, const ClusterAssignment& c) {
    REQUIRE(c.cluster_count() >= 1);
    std::size_t total = 0;
    for (auto z : c.sizes) total += z;
    CHECK(total == s.n);
    for (std::size_t e = 0; e < c.exemplars.size(); ++e) CHECK(c.labels[c.exemplars[e]] == e);
    for (std::size_t i = 0; i < s.n; ++i) {
        if (std::find(c.exemplars.begin(), c.exemplars.end(), i) != c.exemplars.end()) continue;
        double own = s(i, c.exemplars[c.labels[i]]);
        for (auto e : c.exemplars) CHECK(own >= s(i, e));
    }
}

std::vector<std::vector<double>> three_blobs(synth::Rng& rng, std::size_t per_blob) {
    std::vector<std::vector<double>> centres{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}};
    std::vector<std::vector<double>> rows;
    for (std::size_t b = 0; b < 3; ++b) {
        auto blob = synth::cluster_rows(centres[b], per_blob, 0.02, rng);
        rows.insert(rows.end(), blob.begin(), blob.end());
    }
    return rows;
}

}  // namespace

TEST_CASE("similarity matrix entries") {
    auto same = synth::from_rows("s", {{1, 0}, {1, 0}, {1, 0}});
    auto s = similarity_matrix(same);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(s(i, j) == 0.0);

    auto right = similarity_matrix(synth::from_rows("r", {{1, 0}, {0, 1}}));
    CHECK(right(0, 1) == doctest::Approx(-2.0));
}

TEST_CASE("similarity matrix of the four-point fixture") {
    // e1, e2, -e1, (e1+e2)/sqrt2: squared distances are 2 - 2cos.
    const double h = 1.0 / std::sqrt(2.0);
    auto s = similarity_matrix(synth::from_rows("f", {{1, 0}, {0, 1}, {-1, 0}, {h, h}}));
    CHECK(s(0, 1) == doctest::Approx(-2.0));
    CHECK(s(0, 2) == doctest::Approx(-4.0));
    CHECK(s(0, 3) == doctest::Approx(-(2.0 - std::sqrt(2.0))));
    CHECK(s(1, 2) == doctest::Approx(-2.0));
    CHECK(s(1, 3) == doctest::Approx(-(2.0 - std::sqrt(2.0))));
    CHECK(s(2, 3) == doctest::Approx(-(2.0 + std::sqrt(2.0))));
    // Sorted off-diagonal values have -2 in both middle slots.
    for (std::size_t i = 0; i < 4; ++i) CHECK(s(i, i) == doctest::Approx(-2.0));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(s(i, j) == s(j, i));
}

TEST_CASE("identical points form one cluster") {
    auto s = similarity_matrix(synth::from_rows("s", std::vector<std::vector<double>>(6, {0, 1, 0})));
    auto c = cluster_ap(s);
    CHECK(c.cluster_count() == 1);
    check_assignment(s, c);
}

TEST_CASE("single point and two distant points") {
    auto one = cluster_ap(similarity_matrix(synth::from_rows("o", {{1, 0}})));
    CHECK(one.cluster_count() == 1);
    CHECK(one.iterations == 0);

    auto s = similarity_matrix(synth::from_rows("t", {{1, 0}, {-1, 0}}));
    auto two = cluster_ap(s);
    CHECK(two.cluster_count() == 2);
    check_assignment(s, two);
}

TEST_CASE("three well separated blobs") {
    synth::Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        auto rows = three_blobs(rng, 6);
        auto s = similarity_matrix(synth::from_rows("b", rows));
        auto c = cluster_ap(s);
        REQUIRE(c.cluster_count() == 3);
        CHECK_FALSE(c.fallback);
        std::set<std::size_t> blobs;
        for (auto e : c.exemplars) blobs.insert(e / 6);
        CHECK(blobs.size() == 3);
        for (std::size_t i = 0; i < rows.size(); ++i) CHECK(c.exemplars[c.labels[i]] / 6 == i / 6);
        CHECK(c.exemplars == oracle::ap_exemplars(as_rows(s), 0.5, c.iterations));
        check_assignment(s, c);
    }
}

TEST_CASE("labels are stable under point permutation") {
    synth::Rng rng(4);
    auto rows = three_blobs(rng, 5);
    std::vector<std::size_t> perm(rows.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> shuffled;
    for (auto p : perm) shuffled.push_back(rows[p]);

    auto a = cluster_ap(similarity_matrix(synth::from_rows("a", rows)));
    auto b = cluster_ap(similarity_matrix(synth::from_rows("b", shuffled)));
    REQUIRE(a.cluster_count() == b.cluster_count());
    // Same partition up to relabeling.
    std::map<std::size_t, std::size_t> relabel;
    for (std::size_t q = 0; q < perm.size(); ++q) {
        auto [it, inserted] = relabel.emplace(b.labels[q], a.labels[perm[q]]);
        CHECK(it->second == a.labels[perm[q]]);
    }
}

TEST_CASE("assignment invariant and finiteness on random embeddings") {
    synth::Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<std::size_t> size(2, 25);
        auto emb = synth::topical_embeddings("r", size(rng), 12, 3, rng);
        auto s = similarity_matrix(emb);
        auto c = cluster_ap(s);
        check_assignment(s, c);
        for (double v : s.data) CHECK(std::isfinite(v));
        CHECK(c.iterations <= 200);
    }
}

TEST_CASE("option validation") {
    auto s = similarity_matrix(synth::from_rows("v", {{1, 0}, {0, 1}, {1, 0}}));
    CHECK_THROWS_AS(cluster_ap(s, {0.3, 200, 15}), DomainError);
    CHECK_THROWS_AS(cluster_ap(s, {0.5, 0, 15}), DomainError);
    CHECK_THROWS_AS(cluster_ap(SimilarityMatrix{}), DomainError);
}
