#pragma once

// Multiclass one-vs-one support vector classifier trained by sequential
// minimal optimization, with z-score standardization stored in the model.

#include "json.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace csd {

enum class KernelType { linear, rbf };

struct SvcParams {
    double c = 1.0;
    KernelType kernel = KernelType::rbf;
    double gamma = 0.0;  // <= 0 selects "scale": 1 / (d * variance of the standardized training matrix)
    double tol = 1e-3;
    std::size_t max_iter = 10000;
    unsigned jobs = 1;
};

struct BinarySvm {
    double positive_label = 0.0;  // the smaller label of the pair; decision > 0 votes for it
    double negative_label = 0.0;
    std::vector<std::vector<double>> support_vectors;  // standardized space
    std::vector<double> coefficients;                  // alpha_i * y_i
    double bias = 0.0;
    std::size_t iterations = 0;
};

struct SvmModel {
    static constexpr const char* kFormat = "csd-svm";
    static constexpr int kVersion = 1;

    std::vector<double> classes;  // ascending
    KernelType kernel = KernelType::rbf;
    double gamma = 1.0;
    std::vector<double> feature_mean;
    std::vector<double> feature_scale;  // 1 for zero-variance dimensions
    std::vector<BinarySvm> machines;    // pairs (i, j), i < j, in row-major order

    std::size_t dim() const { return feature_mean.size(); }
    std::vector<double> standardize(const std::vector<double>& x) const;
    double kernel_value(const std::vector<double>& a, const std::vector<double>& b) const;
    double decision(const BinarySvm& machine, const std::vector<double>& standardized) const;

    nlohmann::json to_json() const;
    static SvmModel from_json(const nlohmann::json& j);
};

SvmModel train_svc(const std::vector<std::vector<double>>& features, const std::vector<double>& labels,
                   const SvcParams& params = {});

// Pairwise-vote winner; vote ties go to the smaller label.
double predict_svc(const SvmModel& model, const std::vector<double>& features);

}  // namespace csd
