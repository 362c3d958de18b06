#pragma once

// Content-significance distribution of the second kind: per-position
// sentence significance, keeping only the top max(1, floor(0.3n)) sentences.

#include "csd/csd1.hpp"
#include "csd/emd.hpp"
#include "csd/textmodel.hpp"

#include <cstddef>
#include <vector>

namespace csd {

struct Csd2Curve {
    std::size_t n = 0;
    std::size_t t = 0;
    std::vector<double> values;  // entry i-1 is MSc(S_i, A) when selected, else 0
    std::string article_id;

    double x(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(n); }
};

struct Csd2Grid {
    std::vector<double> xs;  // j/100, j = 1..100
    std::vector<double> ys;
    std::size_t members = 0;
};

std::size_t csd2_selection_size(std::size_t n);

std::vector<double> sentence_scores(const Article& article, const EmbeddingMatrix& emb, const SolverOptions& opts = {});

// Keeps the top-t scores; ties at the cut go to the lower sentence index.
Csd2Curve csd2_from_scores(const std::vector<double>& scores);

Csd2Curve csd2_curve(const Article& article, const EmbeddingMatrix& emb, const SolverOptions& opts = {});

Csd2Grid aggregate_csd2(const std::vector<Csd2Curve>& curves, Statistic stat);

}  // namespace csd
