#pragma once

// Affinity Propagation over sentence embeddings.

#include "csd/textmodel.hpp"

#include <cstddef>
#include <vector>

namespace csd {

struct SimilarityMatrix {
    std::size_t n = 0;
    std::vector<double> data;  // row-major n x n; diagonal holds the preferences

    double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
};

struct ClusterAssignment {
    std::vector<std::size_t> exemplars;  // 0-based point indices, ascending
    std::vector<std::size_t> labels;     // cluster id per point, 0..m-1
    std::vector<std::size_t> sizes;      // points per cluster
    std::size_t iterations = 0;
    bool converged = false;
    bool fallback = false;  // no exemplar emerged; single cluster substituted

    std::size_t cluster_count() const { return exemplars.size(); }
};

struct ApOptions {
    double damping = 0.5;
    std::size_t max_iter = 200;
    std::size_t conv_window = 15;
};

// s(i,j) = -||e_i - e_j||^2 off the diagonal; the diagonal is set to the
// median of the off-diagonal values.
SimilarityMatrix similarity_matrix(const EmbeddingMatrix& emb);

double median_off_diagonal(const SimilarityMatrix& s);

ClusterAssignment cluster_ap(const SimilarityMatrix& s, const ApOptions& opts = {});

}  // namespace csd
