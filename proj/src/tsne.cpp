#include "embaudit/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "embaudit/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace embaudit {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

int resolve_threads(int threads) {
#ifdef _OPENMP
    return threads > 0 ? threads : omp_get_max_threads();
#else
    (void)threads;
    return 1;
#endif
}

// Squared Euclidean distances from row i to all rows. Written into d2.
void row_sqdist(const DMatrix& x, std::size_t i, std::vector<double>& d2) {
    const std::size_t n = x.rows;
    const std::size_t dims = x.cols;
    const double* xi = x.row(i);
    for (std::size_t j = 0; j < n; ++j) {
        const double* xj = x.row(j);
        double acc = 0.0;
        for (std::size_t k = 0; k < dims; ++k) {
            const double d = xi[k] - xj[k];
            acc += d * d;
        }
        d2[j] = acc;
    }
}

// Bisection on the precision beta = 1/(2 sigma^2) of row i's Gaussian kernel
// until the base-2 entropy of the conditional distribution hits
// log2(perplexity) within 1e-5 (at most 200 steps). Writes the normalized
// conditional probabilities for row i into p_row (p_row[i] = 0).
void calibrate_row(const std::vector<double>& d2, std::size_t i, double perplexity,
                   std::vector<double>& p_row) {
    const std::size_t n = d2.size();
    double max_d2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j != i) max_d2 = std::max(max_d2, d2[j]);
    }
    if (max_d2 == 0.0) {
        throw std::runtime_error(
            "input_affinities: all pairwise distances are zero for row " +
            std::to_string(i));
    }

    const double target = std::log2(perplexity);
    double beta = 1.0;
    double beta_min = -std::numeric_limits<double>::infinity();
    double beta_max = std::numeric_limits<double>::infinity();

    double sum_p = 0.0;
    for (int step = 0; step < 200; ++step) {
        sum_p = 0.0;
        double sum_dp = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                p_row[j] = 0.0;
                continue;
            }
            const double v = std::exp(-beta * d2[j]);
            p_row[j] = v;
            sum_p += v;
            sum_dp += d2[j] * v;
        }
        // Entropy in bits: H = log2(sum_p) + beta * E[d2] / ln 2.
        const double entropy = std::log2(sum_p) + beta * (sum_dp / sum_p) / kLn2;
        const double diff = entropy - target;
        if (std::fabs(diff) < 1e-5) break;
        if (diff > 0.0) {
            // Entropy too high: sharpen the kernel.
            beta_min = beta;
            beta = std::isinf(beta_max) ? beta * 2.0 : 0.5 * (beta + beta_max);
        } else {
            beta_max = beta;
            beta = std::isinf(beta_min) ? beta * 0.5 : 0.5 * (beta + beta_min);
        }
    }
    for (std::size_t j = 0; j < n; ++j) p_row[j] /= sum_p;
}

void check_affinity_pre(std::size_t n, double perplexity) {
    if (n < 4) {
        throw std::invalid_argument("input_affinities: need at least 4 rows");
    }
    if (!(perplexity > 0.0) || perplexity * 3.0 >= static_cast<double>(n)) {
        throw std::invalid_argument(
            "input_affinities: perplexity must be positive and < n/3");
    }
}

// ---- Barnes-Hut quadtree over the 2-D embedding ----

struct QuadNode {
    double cx = 0.0, cy = 0.0, half = 0.0;  // cell center and half-width
    double sum_x = 0.0, sum_y = 0.0;        // running center-of-mass sums
    std::size_t count = 0;
    int child[4] = {-1, -1, -1, -1};
    std::vector<std::size_t> points;  // populated for leaves only
    bool leaf = true;
};

class QuadTree {
  public:
    QuadTree(const std::vector<double>& y, std::size_t n) : y_(y) {
        double min_x = y[0], max_x = y[0], min_y = y[1], max_y = y[1];
        for (std::size_t i = 1; i < n; ++i) {
            min_x = std::min(min_x, y[2 * i]);
            max_x = std::max(max_x, y[2 * i]);
            min_y = std::min(min_y, y[2 * i + 1]);
            max_y = std::max(max_y, y[2 * i + 1]);
        }
        const double half =
            0.5 * std::max(max_x - min_x, max_y - min_y) + 1e-9;
        nodes_.reserve(2 * n);
        nodes_.push_back(QuadNode{});
        nodes_[0].cx = 0.5 * (min_x + max_x);
        nodes_[0].cy = 0.5 * (min_y + max_y);
        nodes_[0].half = half;
        for (std::size_t i = 0; i < n; ++i) insert(0, i, 0);
    }

    // Accumulates the Barnes-Hut approximation of sum_j w^2 (yi - yj) and
    // z += sum_j w for w = 1/(1 + |yi - yj|^2), skipping j == i.
    void repulsion(std::size_t i, double theta2, double& fx, double& fy,
                   double& z) const {
        walk(0, i, theta2, fx, fy, z);
    }

  private:
    static constexpr int kMaxDepth = 48;

    void insert(int node, std::size_t p, int depth) {
        QuadNode& nd = nodes_[node];
        nd.sum_x += y_[2 * p];
        nd.sum_y += y_[2 * p + 1];
        nd.count += 1;
        if (nd.leaf) {
            if (nd.points.empty() || depth >= kMaxDepth) {
                nd.points.push_back(p);
                return;
            }
            // Split the occupied leaf and push its point down.
            std::vector<std::size_t> old = std::move(nd.points);
            nd.points.clear();
            nd.leaf = false;
            for (std::size_t q : old) insert_child(node, q, depth);
        }
        insert_child(node, p, depth);
    }

    void insert_child(int node, std::size_t p, int depth) {
        const double px = y_[2 * p];
        const double py = y_[2 * p + 1];
        const int qx = px >= nodes_[node].cx ? 1 : 0;
        const int qy = py >= nodes_[node].cy ? 1 : 0;
        const int slot = qy * 2 + qx;
        if (nodes_[node].child[slot] < 0) {
            const double h = nodes_[node].half * 0.5;
            QuadNode child;
            child.cx = nodes_[node].cx + (qx == 1 ? h : -h);
            child.cy = nodes_[node].cy + (qy == 1 ? h : -h);
            child.half = h;
            nodes_.push_back(child);
            // nodes_ may have reallocated; re-index.
            nodes_[node].child[slot] = static_cast<int>(nodes_.size()) - 1;
        }
        insert(nodes_[node].child[slot], p, depth + 1);
    }

    void walk(int node, std::size_t i, double theta2, double& fx, double& fy,
              double& z) const {
        const QuadNode& nd = nodes_[node];
        if (nd.count == 0) return;
        const double inv_count = 1.0 / static_cast<double>(nd.count);
        const double dx = y_[2 * i] - nd.sum_x * inv_count;
        const double dy = y_[2 * i + 1] - nd.sum_y * inv_count;
        const double d2 = dx * dx + dy * dy;
        const double width = 2.0 * nd.half;

        if (!nd.leaf && width * width < theta2 * d2) {
            const double w = 1.0 / (1.0 + d2);
            const double cnt = static_cast<double>(nd.count);
            z += cnt * w;
            fx += cnt * w * w * dx;
            fy += cnt * w * w * dy;
            return;
        }
        if (nd.leaf) {
            for (std::size_t j : nd.points) {
                if (j == i) continue;
                const double ex = y_[2 * i] - y_[2 * j];
                const double ey = y_[2 * i + 1] - y_[2 * j + 1];
                const double w = 1.0 / (1.0 + ex * ex + ey * ey);
                z += w;
                fx += w * w * ex;
                fy += w * w * ey;
            }
            return;
        }
        for (int c : nd.child) {
            if (c >= 0) walk(c, i, theta2, fx, fy, z);
        }
    }

    const std::vector<double>& y_;
    std::vector<QuadNode> nodes_;
};

struct GradientWorkspace {
    std::vector<double> attr;  // n x 2
    std::vector<double> rep;   // n x 2
    std::vector<double> z_partial;
};

// One exact-gradient evaluation: grad = 4 (exag * P - Q) W (yi - yj) summed.
// Deterministic for any thread count: row slots are exclusive and the Z
// reduction is a serial fixed-order sum.
void exact_gradient(const std::vector<double>& p, const std::vector<double>& y,
                    std::size_t n, double exaggeration, int threads,
                    GradientWorkspace& ws, std::vector<double>& grad) {
    ws.attr.assign(2 * n, 0.0);
    ws.rep.assign(2 * n, 0.0);
    ws.z_partial.assign(n, 0.0);
    const int n_threads = resolve_threads(threads);
    (void)n_threads;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(n_threads)
#endif
    for (std::size_t i = 0; i < n; ++i) {
        double ax = 0.0, ay = 0.0, rx = 0.0, ry = 0.0, zi = 0.0;
        const double yi_x = y[2 * i];
        const double yi_y = y[2 * i + 1];
        const double* p_row = p.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = yi_x - y[2 * j];
            const double dy = yi_y - y[2 * j + 1];
            const double w = 1.0 / (1.0 + dx * dx + dy * dy);
            zi += w;
            const double pw = exaggeration * p_row[j] * w;
            ax += pw * dx;
            ay += pw * dy;
            rx += w * w * dx;
            ry += w * w * dy;
        }
        ws.attr[2 * i] = ax;
        ws.attr[2 * i + 1] = ay;
        ws.rep[2 * i] = rx;
        ws.rep[2 * i + 1] = ry;
        ws.z_partial[i] = zi;
    }
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += ws.z_partial[i];
    const double inv_z = 1.0 / z;
    for (std::size_t i = 0; i < 2 * n; ++i) {
        grad[i] = 4.0 * (ws.attr[i] - ws.rep[i] * inv_z);
    }
}

void bh_gradient(const SparseAffinities& p, const std::vector<double>& y, std::size_t n,
                 double exaggeration, double theta, int threads, GradientWorkspace& ws,
                 std::vector<double>& grad) {
    ws.attr.assign(2 * n, 0.0);
    ws.rep.assign(2 * n, 0.0);
    ws.z_partial.assign(n, 0.0);
    const QuadTree tree(y, n);
    const double theta2 = theta * theta;
    const int n_threads = resolve_threads(threads);
    (void)n_threads;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(n_threads)
#endif
    for (std::size_t i = 0; i < n; ++i) {
        double ax = 0.0, ay = 0.0;
        const double yi_x = y[2 * i];
        const double yi_y = y[2 * i + 1];
        for (std::size_t e = p.row_start[i]; e < p.row_start[i + 1]; ++e) {
            const std::size_t j = p.col[e];
            const double dx = yi_x - y[2 * j];
            const double dy = yi_y - y[2 * j + 1];
            const double w = 1.0 / (1.0 + dx * dx + dy * dy);
            const double pw = exaggeration * p.value[e] * w;
            ax += pw * dx;
            ay += pw * dy;
        }
        double rx = 0.0, ry = 0.0, zi = 0.0;
        tree.repulsion(i, theta2, rx, ry, zi);
        ws.attr[2 * i] = ax;
        ws.attr[2 * i + 1] = ay;
        ws.rep[2 * i] = rx;
        ws.rep[2 * i + 1] = ry;
        ws.z_partial[i] = zi;
    }
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += ws.z_partial[i];
    const double inv_z = 1.0 / z;
    for (std::size_t i = 0; i < 2 * n; ++i) {
        grad[i] = 4.0 * (ws.attr[i] - ws.rep[i] * inv_z);
    }
}

// Z = sum over ordered pairs of 1/(1+d2), serial fixed order.
double partition_sum(const std::vector<double>& y, std::size_t n) {
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = y[2 * i] - y[2 * j];
            const double dy = y[2 * i + 1] - y[2 * j + 1];
            z += 1.0 / (1.0 + dx * dx + dy * dy);
        }
    }
    return z;
}

DMatrix to_dmatrix(const FeatureMatrix& features, bool normalize) {
    DMatrix x(features.rows, features.cols);
    for (std::size_t i = 0; i < features.rows; ++i) {
        const float* src = features.row(i);
        double* dst = x.row(i);
        double norm2 = 0.0;
        for (std::size_t j = 0; j < features.cols; ++j) {
            dst[j] = static_cast<double>(src[j]);
            norm2 += dst[j] * dst[j];
        }
        if (normalize && norm2 > 0.0) {
            const double inv = 1.0 / std::sqrt(norm2);
            for (std::size_t j = 0; j < features.cols; ++j) dst[j] *= inv;
        }
    }
    return x;
}

void validate_config(const TsneConfig& config) {
    if (config.iterations == 0 || !(config.learning_rate > 0.0) ||
        !(config.early_exaggeration >= 1.0) || !(config.init_sd > 0.0) ||
        !(config.theta >= 0.0)) {
        throw std::invalid_argument("tsne: non-positive hyperparameter");
    }
}

}  // namespace

const char* tsne_algorithm_name(TsneAlgorithm a) {
    return a == TsneAlgorithm::exact ? "exact" : "barnes_hut";
}

std::vector<double> conditional_affinities(const DMatrix& x, double perplexity,
                                           int threads) {
    const std::size_t n = x.rows;
    check_affinity_pre(n, perplexity);
    std::vector<double> p(n * n, 0.0);
    const int n_threads = resolve_threads(threads);
    (void)n_threads;
    std::exception_ptr first_error = nullptr;
#ifdef _OPENMP
#pragma omp parallel num_threads(n_threads)
#endif
    {
        std::vector<double> d2(n);
        std::vector<double> p_row(n);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
        for (std::size_t i = 0; i < n; ++i) {
            try {
                row_sqdist(x, i, d2);
                calibrate_row(d2, i, perplexity, p_row);
                std::copy(p_row.begin(), p_row.end(), p.begin() + i * n);
            } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
                {
                    if (!first_error) first_error = std::current_exception();
                }
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return p;
}

std::vector<double> input_affinities(const DMatrix& x, double perplexity, int threads) {
    const std::size_t n = x.rows;
    std::vector<double> p = conditional_affinities(x, perplexity, threads);

    // Symmetrize: P = (P + P^T) / (2n); total mass exactly 1.
    const double inv_2n = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = (p[i * n + j] + p[j * n + i]) * inv_2n;
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
        p[i * n + i] = 0.0;
    }
    return p;
}

SparseAffinities sparse_input_affinities(const DMatrix& x, double perplexity,
                                         int threads) {
    const std::size_t n = x.rows;
    check_affinity_pre(n, perplexity);
    const std::size_t k = static_cast<std::size_t>(3.0 * perplexity);

    // Brute-force kNN per row (ties broken by index), then per-row kernel
    // calibration restricted to the neighbour set.
    std::vector<std::size_t> knn(n * k);
    std::vector<double> cond(n * k);
    const int n_threads = resolve_threads(threads);
    (void)n_threads;
    std::exception_ptr first_error = nullptr;
#ifdef _OPENMP
#pragma omp parallel num_threads(n_threads)
#endif
    {
        std::vector<double> d2(n);
        std::vector<std::pair<double, std::size_t>> order(n);
        std::vector<double> nd2(k + 1);
        std::vector<double> p_row(k + 1);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
        for (std::size_t i = 0; i < n; ++i) {
            try {
                row_sqdist(x, i, d2);
                for (std::size_t j = 0; j < n; ++j) order[j] = {d2[j], j};
                order[i].first = std::numeric_limits<double>::infinity();  // drop self
                std::partial_sort(order.begin(), order.begin() + static_cast<long>(k),
                                  order.end());
                // Calibrate over the k neighbours only; index 0 plays the
                // "self" slot the shared routine skips.
                nd2[0] = 0.0;
                for (std::size_t j = 0; j < k; ++j) nd2[j + 1] = order[j].first;
                calibrate_row(nd2, 0, perplexity, p_row);
                for (std::size_t j = 0; j < k; ++j) {
                    knn[i * k + j] = order[j].second;
                    cond[i * k + j] = p_row[j + 1];
                }
            } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
                {
                    if (!first_error) first_error = std::current_exception();
                }
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    // Symmetrize on the union support: entries (i,j,v/2n) and (j,i,v/2n)
    // merged by coordinate sum.
    struct Entry {
        std::size_t i, j;
        double v;
    };
    std::vector<Entry> entries;
    entries.reserve(2 * n * k);
    const double inv_2n = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double v = cond[i * k + j] * inv_2n;
            entries.push_back({i, knn[i * k + j], v});
            entries.push_back({knn[i * k + j], i, v});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });

    SparseAffinities sp;
    sp.n = n;
    sp.row_start.assign(n + 1, 0);
    for (std::size_t e = 0; e < entries.size();) {
        std::size_t f = e;
        double v = 0.0;
        while (f < entries.size() && entries[f].i == entries[e].i &&
               entries[f].j == entries[e].j) {
            v += entries[f].v;
            ++f;
        }
        sp.col.push_back(entries[e].j);
        sp.value.push_back(v);
        ++sp.row_start[entries[e].i + 1];
        e = f;
    }
    for (std::size_t i = 0; i < n; ++i) sp.row_start[i + 1] += sp.row_start[i];
    return sp;
}

void kl_gradient(const std::vector<double>& p, const std::vector<double>& y,
                 std::size_t n, std::vector<double>& grad) {
    grad.assign(2 * n, 0.0);
    GradientWorkspace ws;
    exact_gradient(p, y, n, 1.0, 1, ws, grad);
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& y,
                     std::size_t n) {
    const double z = partition_sum(y, n);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double pij = p[i * n + j];
            if (pij <= 0.0) continue;
            const double dx = y[2 * i] - y[2 * j];
            const double dy = y[2 * i + 1] - y[2 * j + 1];
            const double q = 1.0 / ((1.0 + dx * dx + dy * dy) * z);
            kl += pij * std::log(pij / q);
        }
    }
    return kl;
}

double kl_divergence_sparse(const SparseAffinities& p, const std::vector<double>& y,
                            std::size_t n) {
    const double z = partition_sum(y, n);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t e = p.row_start[i]; e < p.row_start[i + 1]; ++e) {
            const double pij = p.value[e];
            if (pij <= 0.0) continue;
            const std::size_t j = p.col[e];
            const double dx = y[2 * i] - y[2 * j];
            const double dy = y[2 * i + 1] - y[2 * j + 1];
            const double q = 1.0 / ((1.0 + dx * dx + dy * dy) * z);
            kl += pij * std::log(pij / q);
        }
    }
    return kl;
}

Embedding2D tsne(const DMatrix& x, const TsneConfig& config) {
    validate_config(config);
    const std::size_t n = x.rows;
    if (n < 2) {
        throw std::invalid_argument("tsne: need at least 2 rows");
    }
    // Below 4 points no perplexity is calibratable (a row has at most 2
    // neighbours); fall back to uniform affinities so tiny inputs still embed.
    const bool exact = config.algorithm == TsneAlgorithm::exact || n <= 3;
    if (exact && n > 20000) {
        throw std::invalid_argument(
            "tsne: exact mode needs an n x n matrix; use barnes_hut above 20000 rows");
    }

    std::vector<double> p_dense;
    SparseAffinities p_sparse;
    if (n <= 3) {
        const double uniform = 1.0 / static_cast<double>(n * (n - 1));
        p_dense.assign(n * n, uniform);
        for (std::size_t i = 0; i < n; ++i) p_dense[i * n + i] = 0.0;
    } else if (exact) {
        p_dense = input_affinities(x, config.perplexity, config.threads);
    } else {
        p_sparse = sparse_input_affinities(x, config.perplexity, config.threads);
    }

    Embedding2D emb;
    emb.config = config;
    emb.n = n;
    emb.y.resize(2 * n);
    Rng rng(config.seed);
    for (auto& v : emb.y) v = config.init_sd * rng.normal();

    std::vector<double> grad(2 * n, 0.0);
    std::vector<double> velocity(2 * n, 0.0);
    std::vector<double> gain(2 * n, 1.0);
    GradientWorkspace ws;

    for (std::size_t iter = 0; iter < config.iterations; ++iter) {
        const bool early = iter < config.exaggeration_iters;
        const double exaggeration = early ? config.early_exaggeration : 1.0;
        const double momentum = early ? config.momentum_initial : config.momentum_final;

        if (exact) {
            exact_gradient(p_dense, emb.y, n, exaggeration, config.threads, ws, grad);
        } else {
            bh_gradient(p_sparse, emb.y, n, exaggeration, config.theta, config.threads,
                        ws, grad);
        }

        for (std::size_t c = 0; c < 2 * n; ++c) {
            // Adaptive per-coordinate gain: grow while the step keeps moving
            // against the gradient, shrink when it flips (standard schedule).
            const int sg = (grad[c] > 0.0) - (grad[c] < 0.0);
            const int sv = (velocity[c] > 0.0) - (velocity[c] < 0.0);
            gain[c] = sg != sv ? gain[c] + 0.2 : std::max(gain[c] * 0.8, 0.01);
            velocity[c] = momentum * velocity[c] - config.learning_rate * gain[c] * grad[c];
            emb.y[c] += velocity[c];
        }

        // Recenter to zero mean.
        double mean_x = 0.0, mean_y = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean_x += emb.y[2 * i];
            mean_y += emb.y[2 * i + 1];
        }
        mean_x /= static_cast<double>(n);
        mean_y /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            emb.y[2 * i] -= mean_x;
            emb.y[2 * i + 1] -= mean_y;
        }

        for (double v : emb.y) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("tsne: non-finite coordinate at iteration " +
                                         std::to_string(iter));
            }
        }

        const std::size_t done = iter + 1;
        if ((config.kl_log_every > 0 && done % config.kl_log_every == 0) ||
            done == config.iterations) {
            // The trace always measures the true (unexaggerated) objective.
            const double kl = exact ? kl_divergence(p_dense, emb.y, n)
                                    : kl_divergence_sparse(p_sparse, emb.y, n);
            if (emb.kl_trace.empty() || emb.kl_trace.back().first != done) {
                emb.kl_trace.emplace_back(done, kl);
            }
        }
    }
    emb.final_kl = emb.kl_trace.back().second;
    return emb;
}

Embedding2D tsne(const FeatureMatrix& features, const TsneConfig& config) {
    return tsne(to_dmatrix(features, config.normalize_input), config);
}

}  // namespace embaudit
