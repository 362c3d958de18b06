#include "csd/svm.hpp"

#include "csd/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace csd {

namespace {

constexpr double kTau = 1e-12;

struct SmoResult {
    std::vector<double> alpha;
    double bias = 0.0;
    std::size_t iterations = 0;
};

// Dual SMO with second-order working-set selection on a precomputed Gram
// matrix.  y holds +1 / -1.
SmoResult solve_smo(const std::vector<double>& gram, const std::vector<int>& y, double c, double tol,
                    std::size_t max_iter) {
    const std::size_t n = y.size();
    auto k = [&](std::size_t i, std::size_t j) { return gram[i * n + j]; };
    auto q = [&](std::size_t i, std::size_t j) { return static_cast<double>(y[i] * y[j]) * k(i, j); };

    std::vector<double> alpha(n, 0.0), grad(n, -1.0);
    auto is_upper = [&](std::size_t t) { return alpha[t] >= c; };
    auto is_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] == 1) {
                if (!is_upper(t) && -grad[t] >= gmax) {
                    gmax = -grad[t];
                    i = t;
                }
            } else if (!is_lower(t) && grad[t] >= gmax) {
                gmax = grad[t];
                i = t;
            }
        }
        if (i == n) break;

        double gmax2 = -std::numeric_limits<double>::infinity();
        double obj_min = std::numeric_limits<double>::infinity();
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] == 1) {
                if (is_lower(t)) continue;
                double diff = gmax + grad[t];
                gmax2 = std::max(gmax2, grad[t]);
                if (diff > 0.0) {
                    double quad = k(i, i) + k(t, t) - 2.0 * y[i] * q(i, t);
                    double obj = -(diff * diff) / (quad > 0.0 ? quad : kTau);
                    if (obj <= obj_min) {
                        obj_min = obj;
                        j = t;
                    }
                }
            } else {
                if (is_upper(t)) continue;
                double diff = gmax - grad[t];
                gmax2 = std::max(gmax2, -grad[t]);
                if (diff > 0.0) {
                    double quad = k(i, i) + k(t, t) + 2.0 * y[i] * q(i, t);
                    double obj = -(diff * diff) / (quad > 0.0 ? quad : kTau);
                    if (obj <= obj_min) {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }
        if (gmax + gmax2 < tol || j == n) break;

        const double old_i = alpha[i], old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = k(i, i) + k(j, j) + 2.0 * q(i, j);
            if (quad <= 0.0) quad = kTau;
            double delta = (-grad[i] - grad[j]) / quad;
            double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = k(i, i) + k(j, j) - 2.0 * q(i, j);
            if (quad <= 0.0) quad = kTau;
            double delta = (grad[i] - grad[j]) / quad;
            double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
    }

    // Bias from free variables, else the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    std::size_t free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        double yg = y[t] * grad[t];
        if (is_upper(t)) {
            if (y[t] == -1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (is_lower(t)) {
            if (y[t] == 1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++free;
            sum_free += yg;
        }
    }
    double rho = free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
    return {std::move(alpha), -rho, iter};
}

const char* kernel_name(KernelType k) { return k == KernelType::rbf ? "rbf" : "linear"; }

KernelType kernel_from_name(const std::string& s) {
    if (s == "rbf") return KernelType::rbf;
    if (s == "linear") return KernelType::linear;
    throw DataError("unknown kernel '" + s + "'");
}

}  // namespace

std::vector<double> SvmModel::standardize(const std::vector<double>& x) const {
    if (x.size() != dim()) {
        throw DomainError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                          std::to_string(dim()));
    }
    std::vector<double> z(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) z[d] = (x[d] - feature_mean[d]) / feature_scale[d];
    return z;
}

double SvmModel::kernel_value(const std::vector<double>& a, const std::vector<double>& b) const {
    if (kernel == KernelType::linear) {
        double s = 0.0;
        for (std::size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
        return s;
    }
    double d2 = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        double diff = a[d] - b[d];
        d2 += diff * diff;
    }
    return std::exp(-gamma * d2);
}

double SvmModel::decision(const BinarySvm& machine, const std::vector<double>& z) const {
    double s = machine.bias;
    for (std::size_t v = 0; v < machine.support_vectors.size(); ++v) {
        s += machine.coefficients[v] * kernel_value(machine.support_vectors[v], z);
    }
    return s;
}

nlohmann::json SvmModel::to_json() const {
    nlohmann::json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["classes"] = classes;
    j["kernel"] = kernel_name(kernel);
    j["gamma"] = gamma;
    j["feature_mean"] = feature_mean;
    j["feature_scale"] = feature_scale;
    auto& ms = j["machines"] = nlohmann::json::array();
    for (const auto& m : machines) {
        ms.push_back({{"positive_label", m.positive_label},
                      {"negative_label", m.negative_label},
                      {"bias", m.bias},
                      {"coefficients", m.coefficients},
                      {"support_vectors", m.support_vectors}});
    }
    return j;
}

SvmModel SvmModel::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kFormat) throw DataError("not an SVM model document");
        if (j.at("version").get<int>() != kVersion) {
            throw DataError("unsupported model version " + std::to_string(j.at("version").get<int>()));
        }
        SvmModel m;
        m.classes = j.at("classes").get<std::vector<double>>();
        m.kernel = kernel_from_name(j.at("kernel").get<std::string>());
        m.gamma = j.at("gamma").get<double>();
        m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
        m.feature_scale = j.at("feature_scale").get<std::vector<double>>();
        for (const auto& mj : j.at("machines")) {
            BinarySvm b;
            b.positive_label = mj.at("positive_label").get<double>();
            b.negative_label = mj.at("negative_label").get<double>();
            b.bias = mj.at("bias").get<double>();
            b.coefficients = mj.at("coefficients").get<std::vector<double>>();
            b.support_vectors = mj.at("support_vectors").get<std::vector<std::vector<double>>>();
            if (b.coefficients.size() != b.support_vectors.size()) throw DataError("support vector count mismatch");
            m.machines.push_back(std::move(b));
        }
        const std::size_t pairs = m.classes.size() * (m.classes.size() - 1) / 2;
        if (m.classes.size() < 2 || m.machines.size() != pairs || m.feature_mean.size() != m.feature_scale.size()) {
            throw DataError("inconsistent SVM model document");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed SVM model: ") + e.what());
    }
}

SvmModel train_svc(const std::vector<std::vector<double>>& features, const std::vector<double>& labels,
                   const SvcParams& params) {
    if (features.size() != labels.size()) throw DomainError("feature and label counts differ");
    if (features.empty()) throw DomainError("no training data");
    if (!(params.c > 0.0)) throw DomainError("SVM C must be positive");
    const std::size_t n = features.size(), d = features.front().size();
    for (const auto& f : features)
        if (f.size() != d) throw DomainError("ragged feature matrix");

    SvmModel model;
    model.kernel = params.kernel;
    model.classes = labels;
    std::sort(model.classes.begin(), model.classes.end());
    model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
    if (model.classes.size() < 2) throw DomainError("training requires at least two distinct labels");

    model.feature_mean.assign(d, 0.0);
    model.feature_scale.assign(d, 1.0);
    for (std::size_t k = 0; k < d; ++k) {
        double mean = 0.0;
        for (const auto& f : features) mean += f[k];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& f : features) var += (f[k] - mean) * (f[k] - mean);
        var /= static_cast<double>(n);
        if (var > 1e-24) {
            model.feature_mean[k] = mean;
            model.feature_scale[k] = std::sqrt(var);
        }
    }
    std::vector<std::vector<double>> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = model.standardize(features[i]);

    if (params.gamma > 0.0) {
        model.gamma = params.gamma;
    } else {
        double mean = 0.0, sq = 0.0;
        for (const auto& row : z)
            for (double v : row) mean += v;
        mean /= static_cast<double>(n * d);
        for (const auto& row : z)
            for (double v : row) sq += (v - mean) * (v - mean);
        double var = sq / static_cast<double>(n * d);
        model.gamma = var > 0.0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
    }

    const std::size_t m = model.classes.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) pairs.emplace_back(a, b);
    model.machines.resize(pairs.size());

    parallel_for(pairs.size(), params.jobs, [&](std::size_t p) {
        const double pos = model.classes[pairs[p].first], neg = model.classes[pairs[p].second];
        std::vector<std::size_t> members;
        std::vector<int> y;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == pos) {
                members.push_back(i);
                y.push_back(1);
            } else if (labels[i] == neg) {
                members.push_back(i);
                y.push_back(-1);
            }
        }
        const std::size_t sub = members.size();
        std::vector<double> gram(sub * sub);
        for (std::size_t a = 0; a < sub; ++a)
            for (std::size_t b = a; b < sub; ++b)
                gram[a * sub + b] = gram[b * sub + a] = model.kernel_value(z[members[a]], z[members[b]]);
        SmoResult r = solve_smo(gram, y, params.c, params.tol, params.max_iter);

        BinarySvm& machine = model.machines[p];
        machine.positive_label = pos;
        machine.negative_label = neg;
        machine.bias = r.bias;
        machine.iterations = r.iterations;
        for (std::size_t a = 0; a < sub; ++a) {
            if (r.alpha[a] > 0.0) {
                machine.support_vectors.push_back(z[members[a]]);
                machine.coefficients.push_back(r.alpha[a] * y[a]);
            }
        }
    });
    return model;
}

double predict_svc(const SvmModel& model, const std::vector<double>& features) {
    const std::vector<double> z = model.standardize(features);
    std::map<double, std::size_t> votes;
    for (double c : model.classes) votes[c] = 0;
    for (const auto& machine : model.machines) {
        ++votes[model.decision(machine, z) > 0.0 ? machine.positive_label : machine.negative_label];
    }
    double best = model.classes.front();
    std::size_t best_votes = 0;
    for (const auto& [label, count] : votes) {
        if (count > best_votes) {
            best_votes = count;
            best = label;
        }
    }
    return best;
}

}  // namespace csd
