#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "embaudit/types.hpp"

namespace embaudit {

enum class TsneAlgorithm {
    exact,       // O(n^2) gradient
    barnes_hut,  // quadtree approximation of the repulsive term
};

const char* tsne_algorithm_name(TsneAlgorithm a);

struct TsneConfig {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;   // exaggeration and momentum switch point
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    double init_sd = 1e-4;                  // Gaussian init scale for Y
    std::uint64_t seed = 0;
    TsneAlgorithm algorithm = TsneAlgorithm::exact;
    double theta = 0.5;                     // Barnes-Hut accuracy knob
    bool normalize_input = false;           // L2-normalize each row before distances
    std::size_t kl_log_every = 50;          // KL recorded every this many iterations
    int threads = 0;
};

struct Embedding2D {
    std::size_t n = 0;
    std::vector<double> y;  // row-major n x 2
    std::vector<std::pair<std::size_t, double>> kl_trace;  // (iteration, KL)
    double final_kl = 0.0;

    double* point(std::size_t i) { return y.data() + 2 * i; }
    const double* point(std::size_t i) const { return y.data() + 2 * i; }

    TsneConfig config;  // settings echo, so an embedding is self-describing
};

// Conditional affinities P(j|i): per-row Gaussian kernels with bandwidths
// found by bisection so each row's base-2 entropy matches log2(perplexity)
// within 1e-5 (at most 200 bisection steps). Dense row-major n x n; each row
// sums to 1; diagonal zero.
std::vector<double> conditional_affinities(const DMatrix& x, double perplexity,
                                           int threads = 0);

// Symmetrized input affinities P = (P(j|i) + P(i|j)) / (2n).
// Dense row-major n x n; diagonal zero; entries sum to 1.
std::vector<double> input_affinities(const DMatrix& x, double perplexity,
                                     int threads = 0);

// Sparse variant used by Barnes-Hut: affinities restricted to each row's
// k = 3 * perplexity nearest neighbours (by Euclidean distance, ties by index).
struct SparseAffinities {
    std::size_t n = 0;
    std::vector<std::size_t> row_start;  // n + 1 offsets
    std::vector<std::size_t> col;
    std::vector<double> value;
};

SparseAffinities sparse_input_affinities(const DMatrix& x, double perplexity,
                                         int threads = 0);

// Gradient of KL(P || Q) at Y, exact formulation. Exposed for finite-difference
// checking. P is dense row-major n x n; grad is n x 2 row-major.
void kl_gradient(const std::vector<double>& p, const std::vector<double>& y,
                 std::size_t n, std::vector<double>& grad);

double kl_divergence(const std::vector<double>& p, const std::vector<double>& y,
                     std::size_t n);

// KL against sparse affinities (Barnes-Hut bookkeeping uses the same Z).
double kl_divergence_sparse(const SparseAffinities& p, const std::vector<double>& y,
                            std::size_t n);

// Full t-SNE pass over the feature matrix.
Embedding2D tsne(const FeatureMatrix& features, const TsneConfig& config);
Embedding2D tsne(const DMatrix& x, const TsneConfig& config);

}  // namespace embaudit
