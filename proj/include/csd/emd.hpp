#pragma once

// Earth Mover's Distance between weighted embedding clouds and the
// MoverScore similarity built on it.
//
// Ground cost between unit vectors is (1 - cos) / 2, so every transport
// cost lies in [0, 1] and MoverScore = 1 - EMD lies in [0, 1] as well.

#include "csd/textmodel.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace csd {

// Dense row-major matrix of transport costs.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    CostMatrix() = default;
    CostMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

class WeightedPointCloud {
public:
    // Throws DomainError on empty clouds, ragged dimensions, negative weights
    // or a weight sum more than 1e-9 away from 1.
    WeightedPointCloud(std::size_t dim, std::vector<double> points, std::vector<double> weights);

    // Uniform weights 1/rows over the rows of an embedding matrix.
    static WeightedPointCloud uniform(const EmbeddingMatrix& emb);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return weights_.size(); }
    std::span<const double> point(std::size_t i) const { return {points_.data() + i * dim_, dim_}; }
    const std::vector<double>& weights() const { return weights_; }

private:
    std::size_t dim_;
    std::vector<double> points_;
    std::vector<double> weights_;
};

struct TransportPlan {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> flow;  // row-major, rows x cols
    double cost = 0.0;

    double at(std::size_t i, std::size_t j) const { return flow[i * cols + j]; }
};

struct SinkhornResult {
    double cost = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double marginal_error = 0.0;
};

enum class SolverMode { exact, sinkhorn, automatic };

struct SolverOptions {
    SolverMode mode = SolverMode::automatic;
    double epsilon = 0.01;
    std::size_t max_iter = 1000;
    // automatic mode stays exact up to this many source x target points
    std::size_t exact_max_rows = 64;
    std::size_t exact_max_cols = 512;
};

// (1 - cos(x_i, y_j)) / 2, clamped to [0, 1].  Bitwise-identical vectors
// cost exactly 0.
double ground_cost(std::span<const double> x, std::span<const double> y);
CostMatrix cost_matrix(const WeightedPointCloud& x, const WeightedPointCloud& y);

// Optimal transport by the transportation simplex (least-cost start, MODI
// pricing).  Zero-weight rows and columns are dropped before solving and
// carry zero flow in the returned plan.
TransportPlan solve_emd_exact(std::span<const double> wx, std::span<const double> wy, const CostMatrix& cost);

// Entropic-regularized transport in the log domain.  Returns the transport
// cost <P, C> of the regularized plan; non-convergence is reported through
// the result, not thrown.
SinkhornResult solve_emd_sinkhorn(std::span<const double> wx, std::span<const double> wy, const CostMatrix& cost,
                                  double epsilon, std::size_t max_iter);

double transport_cost(std::span<const double> wx, std::span<const double> wy, const CostMatrix& cost,
                      const SolverOptions& opts = {});

double mover_score(const WeightedPointCloud& block, const WeightedPointCloud& article,
                   const SolverOptions& opts = {});

// Scores sub-text blocks of one article against the whole article.  The
// sentence-to-sentence ground costs are computed once; each block then
// solves a k x n problem with uniform weights.
class BlockScorer {
public:
    explicit BlockScorer(const EmbeddingMatrix& emb, SolverOptions opts = {});

    std::size_t sentence_count() const { return n_; }
    double score(const BlockIndex& block) const;
    // Score of the single sentence at 1-based index i.
    double sentence_score(std::size_t index) const;

private:
    std::size_t n_;
    CostMatrix ground_;
    SolverOptions opts_;
};

}  // namespace csd
