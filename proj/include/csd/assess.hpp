#pragma once

// Article-organization assessment: rater-score merging, multi-size CSD-1
// features, stratified splitting and tolerance-banded evaluation.

#include "csd/csd1.hpp"
#include "csd/svm.hpp"
#include "csd/textmodel.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace csd {

struct EssayRecord {
    Article article;
    std::vector<double> rater_scores;
    double label = 0.0;
};

struct FeatureVector {
    std::string essay_id;
    std::vector<double> values;  // 9 sizes x 10 positions, ascending size
};

struct FeatureOptions {
    std::size_t samples = 1000;   // N blocks per size
    std::size_t size_divisions = 10;  // sizes c = 1/10 .. 9/10
    std::size_t positions = 10;
    SolverOptions solver{};
    unsigned jobs = 1;
};

// Mean rounded to the nearest 0.5; .25 / .75 midpoints round up.
double merge_scores(const std::vector<double>& rater_scores);

FeatureVector extract_features(const Article& article, const EmbeddingMatrix& emb, std::uint64_t seed,
                               const FeatureOptions& opts = {});

struct Split {
    std::vector<std::size_t> train;  // indices into the input, ascending
    std::vector<std::size_t> test;
};

// Label-stratified split; labels with >= 2 members land in both parts
// whenever the totals allow it.
Split split_dataset(const std::vector<double>& labels, double train_frac, std::uint64_t seed);

struct ToleranceMetrics {
    double tolerance = 0.0;
    double hit_rate = 0.0;  // fraction in [0, 1]
    double macro_f1 = 0.0;
};

std::vector<ToleranceMetrics> evaluate(const std::vector<double>& predictions, const std::vector<double>& labels,
                                       const std::vector<double>& tolerances = {0.0, 0.5, 1.0});

}  // namespace csd
