#include "csd/emd.hpp"

#include "csd/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace csd {

namespace {

constexpr double kWeightTolerance = 1e-9;

double weight_sum(std::span<const double> w) {
    double s = 0.0;
    for (double v : w) s += v;
    return s;
}

void check_distribution(std::span<const double> w, const char* what) {
    if (w.empty()) throw DomainError(std::string(what) + " distribution is empty");
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + " has a negative or non-finite weight");
    }
    if (weight_sum(w) <= 0.0) throw DomainError(std::string(what) + " has zero total mass");
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

// Transportation simplex on a reduced problem with strictly positive
// supplies and demands of equal total.  Tree nodes 0..m-1 are rows and
// m..m+n-1 are columns; every basic cell is a tree edge.
class TransportationSimplex {
public:
    TransportationSimplex(std::vector<double> supply, std::vector<double> demand, std::vector<double> cost)
        : m_(supply.size()), n_(demand.size()), supply_(std::move(supply)), demand_(std::move(demand)),
          cost_(std::move(cost)), flow_(m_ * n_, 0.0), basic_(m_ * n_, 0), row_cells_(m_), col_cells_(n_) {
        double cmax = 0.0;
        for (double c : cost_) cmax = std::max(cmax, std::abs(c));
        tol_ = 1e-12 * std::max(1.0, cmax);
    }

    std::vector<double> solve() {
        initial_basis();
        const std::size_t bland_after = 20 * m_ * n_ + 100;
        const std::size_t hard_cap = 2000 * m_ * n_ + 10000;
        for (std::size_t iter = 0;; ++iter) {
            if (iter > hard_cap) throw DomainError("transportation simplex failed to terminate");
            compute_potentials();
            std::size_t entering = choose_entering(iter >= bland_after);
            if (entering == npos) break;
            pivot(entering);
        }
        return flow_;
    }

private:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    std::size_t m_, n_;
    std::vector<double> supply_, demand_, cost_, flow_;
    std::vector<char> basic_;
    std::vector<std::vector<std::size_t>> row_cells_;  // columns of basic cells per row
    std::vector<std::vector<std::size_t>> col_cells_;  // rows of basic cells per column
    std::vector<double> u_, v_;
    double tol_ = 0.0;

    void add_basic(std::size_t i, std::size_t j) {
        basic_[i * n_ + j] = 1;
        row_cells_[i].push_back(j);
        col_cells_[j].push_back(i);
    }

    void remove_basic(std::size_t i, std::size_t j) {
        basic_[i * n_ + j] = 0;
        auto& r = row_cells_[i];
        r.erase(std::find(r.begin(), r.end(), j));
        auto& c = col_cells_[j];
        c.erase(std::find(c.begin(), c.end(), i));
    }

    // Matrix-minimum start: visit cells by ascending cost and saturate the
    // smaller of the remaining row/column mass.  Each allocation retires a
    // line, so allocated cells form a forest; zero-flow cells then join the
    // components into a spanning tree.
    void initial_basis() {
        std::vector<std::size_t> order(m_ * n_);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cost_[a] < cost_[b]; });

        std::vector<double> rs = supply_, rd = demand_;
        std::vector<char> row_open(m_, 1), col_open(n_, 1);
        UnionFind uf(m_ + n_);
        std::size_t basics = 0;
        for (std::size_t cell : order) {
            std::size_t i = cell / n_, j = cell % n_;
            if (!row_open[i] || !col_open[j]) continue;
            if (rs[i] <= rd[j]) {
                flow_[cell] = rs[i];
                rd[j] -= rs[i];
                rs[i] = 0.0;
                row_open[i] = 0;
            } else {
                flow_[cell] = rd[j];
                rs[i] -= rd[j];
                rd[j] = 0.0;
                col_open[j] = 0;
            }
            add_basic(i, j);
            uf.unite(i, m_ + j);
            ++basics;
        }
        for (std::size_t cell : order) {
            if (basics + 1 >= m_ + n_) break;
            std::size_t i = cell / n_, j = cell % n_;
            if (basic_[cell]) continue;
            if (uf.unite(i, m_ + j)) {
                add_basic(i, j);
                ++basics;
            }
        }
    }

    void compute_potentials() {
        u_.assign(m_, 0.0);
        v_.assign(n_, 0.0);
        std::vector<char> seen(m_ + n_, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            std::size_t node = stack.back();
            stack.pop_back();
            if (node < m_) {
                for (std::size_t j : row_cells_[node]) {
                    if (seen[m_ + j]) continue;
                    v_[j] = cost_[node * n_ + j] - u_[node];
                    seen[m_ + j] = 1;
                    stack.push_back(m_ + j);
                }
            } else {
                std::size_t j = node - m_;
                for (std::size_t i : col_cells_[j]) {
                    if (seen[i]) continue;
                    u_[i] = cost_[i * n_ + j] - v_[j];
                    seen[i] = 1;
                    stack.push_back(i);
                }
            }
        }
    }

    std::size_t choose_entering(bool bland) const {
        std::size_t best = npos;
        double best_rc = -tol_;
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                std::size_t cell = i * n_ + j;
                if (basic_[cell]) continue;
                double rc = cost_[cell] - u_[i] - v_[j];
                if (rc < best_rc) {
                    if (bland) return cell;
                    best_rc = rc;
                    best = cell;
                }
            }
        }
        return best;
    }

    void pivot(std::size_t entering) {
        const std::size_t ei = entering / n_, ej = entering % n_;
        // Tree path from row ei to column ej.
        std::vector<std::size_t> parent(m_ + n_, npos);
        std::vector<char> seen(m_ + n_, 0);
        std::vector<std::size_t> queue{ei};
        seen[ei] = 1;
        const std::size_t target = m_ + ej;
        for (std::size_t head = 0; head < queue.size() && !seen[target]; ++head) {
            std::size_t node = queue[head];
            if (node < m_) {
                for (std::size_t j : row_cells_[node]) {
                    if (seen[m_ + j]) continue;
                    seen[m_ + j] = 1;
                    parent[m_ + j] = node;
                    queue.push_back(m_ + j);
                }
            } else {
                for (std::size_t i : col_cells_[node - m_]) {
                    if (seen[i]) continue;
                    seen[i] = 1;
                    parent[i] = node;
                    queue.push_back(i);
                }
            }
        }
        // Cells along the path, starting at the column end.  Walking back
        // from column ej, the first edge gets -, then alternating.
        std::vector<std::size_t> cells;
        for (std::size_t node = target; parent[node] != npos; node = parent[node]) {
            std::size_t other = parent[node];
            std::size_t i = node < m_ ? node : other;
            std::size_t j = (node < m_ ? other : node) - m_;
            cells.push_back(i * n_ + j);
        }
        std::size_t leaving = npos;
        double theta = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < cells.size(); t += 2) {
            double f = flow_[cells[t]];
            if (f < theta || (f == theta && cells[t] < leaving)) {
                theta = f;
                leaving = cells[t];
            }
        }
        flow_[entering] = theta;
        for (std::size_t t = 0; t < cells.size(); ++t) {
            double& f = flow_[cells[t]];
            f = (t % 2 == 0) ? f - theta : f + theta;
            if (f < 0.0) f = 0.0;
        }
        flow_[leaving] = 0.0;
        remove_basic(leaving / n_, leaving % n_);
        add_basic(ei, ej);
    }
};

}  // namespace

WeightedPointCloud::WeightedPointCloud(std::size_t dim, std::vector<double> points, std::vector<double> weights)
    : dim_(dim), points_(std::move(points)), weights_(std::move(weights)) {
    if (weights_.empty()) throw DomainError("point cloud must contain at least one point");
    if (dim_ == 0 || points_.size() != dim_ * weights_.size()) throw DomainError("point cloud dimensions are inconsistent");
    for (double w : weights_) {
        if (!(w >= 0.0)) throw DomainError("point cloud weights must be non-negative");
    }
    if (std::abs(weight_sum(weights_) - 1.0) > kWeightTolerance) throw DomainError("point cloud weights must sum to 1");
}

WeightedPointCloud WeightedPointCloud::uniform(const EmbeddingMatrix& emb) {
    const std::size_t n = emb.rows();
    if (n == 0) throw DomainError("point cloud must contain at least one point");
    return WeightedPointCloud(emb.dim(), emb.data(), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

double ground_cost(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DomainError("ground cost: dimension mismatch");
    if (std::equal(x.begin(), x.end(), y.begin())) return 0.0;
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        dot += x[d] * y[d];
        nx += x[d] * x[d];
        ny += y[d] * y[d];
    }
    if (nx == 0.0 || ny == 0.0) return 0.5;
    double cos = dot / std::sqrt(nx * ny);
    return std::clamp((1.0 - cos) / 2.0, 0.0, 1.0);
}

CostMatrix cost_matrix(const WeightedPointCloud& x, const WeightedPointCloud& y) {
    if (x.dim() != y.dim()) throw DomainError("cost matrix: dimension mismatch");
    CostMatrix c(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) c(i, j) = ground_cost(x.point(i), y.point(j));
    }
    return c;
}

TransportPlan solve_emd_exact(std::span<const double> wx, std::span<const double> wy, const CostMatrix& cost) {
    check_distribution(wx, "source");
    check_distribution(wy, "target");
    if (cost.rows != wx.size() || cost.cols != wy.size()) throw DomainError("cost matrix shape does not match weights");
    for (double c : cost.data) {
        if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("cost matrix must be non-negative and finite");
    }

    std::vector<std::size_t> rows, cols;
    for (std::size_t i = 0; i < wx.size(); ++i)
        if (wx[i] > 0.0) rows.push_back(i);
    for (std::size_t j = 0; j < wy.size(); ++j)
        if (wy[j] > 0.0) cols.push_back(j);

    std::vector<double> supply(rows.size()), demand(cols.size()), sub(rows.size() * cols.size());
    for (std::size_t a = 0; a < rows.size(); ++a) supply[a] = wx[rows[a]];
    for (std::size_t b = 0; b < cols.size(); ++b) demand[b] = wy[cols[b]];
    // Equalize totals (they agree to within the caller's tolerance).
    const double scale = weight_sum(supply) / weight_sum(demand);
    for (double& d : demand) d *= scale;
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b) sub[a * cols.size() + b] = cost(rows[a], cols[b]);

    TransportationSimplex simplex(std::move(supply), std::move(demand), std::move(sub));
    std::vector<double> reduced = simplex.solve();

    TransportPlan plan;
    plan.rows = wx.size();
    plan.cols = wy.size();
    plan.flow.assign(plan.rows * plan.cols, 0.0);
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = 0; b < cols.size(); ++b) {
            plan.flow[rows[a] * plan.cols + cols[b]] = reduced[a * cols.size() + b];
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < plan.rows; ++i)
        for (std::size_t j = 0; j < plan.cols; ++j) total += plan.flow[i * plan.cols + j] * cost(i, j);
    plan.cost = std::max(0.0, total);
    return plan;
}

SinkhornResult solve_emd_sinkhorn(std::span<const double> wx, std::span<const double> wy, const CostMatrix& cost,
                                  double epsilon, std::size_t max_iter) {
    if (!(epsilon > 0.0)) throw DomainError("sinkhorn epsilon must be positive");
    if (max_iter == 0) throw DomainError("sinkhorn max_iter must be positive");
    check_distribution(wx, "source");
    check_distribution(wy, "target");
    if (cost.rows != wx.size() || cost.cols != wy.size()) throw DomainError("cost matrix shape does not match weights");

    const std::size_t m = wx.size(), n = wy.size();
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> log_a(m), log_b(n), f(m, 0.0), g(n, 0.0), buf(std::max(m, n));
    for (std::size_t i = 0; i < m; ++i) log_a[i] = wx[i] > 0.0 ? std::log(wx[i]) : neg_inf;
    for (std::size_t j = 0; j < n; ++j) log_b[j] = wy[j] > 0.0 ? std::log(wy[j]) : neg_inf;

    auto lse = [](std::span<const double> v) {
        double mx = *std::max_element(v.begin(), v.end());
        if (!std::isfinite(mx)) return mx;
        double s = 0.0;
        for (double x : v) s += std::exp(x - mx);
        return mx + std::log(s);
    };

    SinkhornResult result;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) buf[j] = (g[j] - cost(i, j)) / epsilon;
            f[i] = wx[i] > 0.0 ? epsilon * (log_a[i] - lse({buf.data(), n})) : neg_inf;
        }
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < m; ++i) buf[i] = (f[i] - cost(i, j)) / epsilon;
            g[j] = wy[j] > 0.0 ? epsilon * (log_b[j] - lse({buf.data(), m})) : neg_inf;
        }
        // Columns are exact after the g update; measure the row violation.
        double err = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double row = 0.0;
            if (wx[i] > 0.0) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (wy[j] > 0.0) row += std::exp((f[i] + g[j] - cost(i, j)) / epsilon);
                }
            }
            err += std::abs(row - wx[i]);
        }
        result.iterations = it;
        result.marginal_error = err;
        if (err < 1e-6) {
            result.converged = true;
            break;
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (wx[i] <= 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (wy[j] <= 0.0) continue;
            total += std::exp((f[i] + g[j] - cost(i, j)) / epsilon) * cost(i, j);
        }
    }
    result.cost = std::max(0.0, total);
    return result;
}

double transport_cost(std::span<const double> wx, std::span<const double> wy, const CostMatrix& cost,
                      const SolverOptions& opts) {
    bool exact = opts.mode == SolverMode::exact ||
                 (opts.mode == SolverMode::automatic && wx.size() <= opts.exact_max_rows && wy.size() <= opts.exact_max_cols);
    if (exact) return solve_emd_exact(wx, wy, cost).cost;
    return solve_emd_sinkhorn(wx, wy, cost, opts.epsilon, opts.max_iter).cost;
}

double mover_score(const WeightedPointCloud& block, const WeightedPointCloud& article, const SolverOptions& opts) {
    CostMatrix c = cost_matrix(block, article);
    double emd = transport_cost(block.weights(), article.weights(), c, opts);
    return std::clamp(1.0 - emd, 0.0, 1.0);
}

BlockScorer::BlockScorer(const EmbeddingMatrix& emb, SolverOptions opts)
    : n_(emb.rows()), ground_(emb.rows(), emb.rows()), opts_(opts) {
    if (n_ == 0) throw DomainError("cannot score an empty article");
    for (std::size_t i = 0; i < n_; ++i) {
        ground_(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n_; ++j) {
            double c = ground_cost(emb.row(i), emb.row(j));
            ground_(i, j) = c;
            ground_(j, i) = c;
        }
    }
}

double BlockScorer::score(const BlockIndex& block) const {
    const std::size_t k = block.size();
    if (k == 0) throw DomainError("cannot score an empty block");
    CostMatrix c(k, n_);
    for (std::size_t r = 0; r < k; ++r) {
        std::size_t src = block[r];
        if (src < 1 || src > n_) throw DomainError("block index out of range");
        std::copy_n(ground_.data.begin() + static_cast<std::ptrdiff_t>((src - 1) * n_), n_,
                    c.data.begin() + static_cast<std::ptrdiff_t>(r * n_));
    }
    std::vector<double> wx(k, 1.0 / static_cast<double>(k));
    std::vector<double> wy(n_, 1.0 / static_cast<double>(n_));
    return std::clamp(1.0 - transport_cost(wx, wy, c, opts_), 0.0, 1.0);
}

double BlockScorer::sentence_score(std::size_t index) const {
    return score(BlockIndex({static_cast<std::uint32_t>(index)}));
}

}  // namespace csd
