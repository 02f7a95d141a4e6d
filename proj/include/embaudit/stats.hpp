#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace embaudit {

struct TTestResult {
    double t_stat = 0.0;
    double df = 0.0;
    double p_value = 1.0;  // two-tailed
    double mean_a = 0.0;
    double mean_b = 0.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

enum class TTestKind { welch, pooled };

// Two-sample t-test. Welch (unequal variances) is the default; the pooled
// Student variant is available for sensitivity analysis. Degenerate inputs
// where both samples have zero variance yield p = 1 (equal means) or p = 0
// (unequal means) so downstream significance maps never contain NaN.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);
TTestResult t_test(std::span<const double> a, std::span<const double> b, TTestKind kind);

// CDF of Student's t distribution via the regularized incomplete beta
// function. Absolute error well below 1e-10 over practical (t, df).
double student_t_cdf(double t, double df);

// I_x(a, b), continued-fraction evaluation (Lentz).
double regularized_incomplete_beta(double a, double b, double x);

// alpha / m, exactly.
double bonferroni_alpha(double alpha, std::size_t m);

struct SplitPlan {
    std::vector<std::size_t> train_idx;  // ascending
    std::vector<std::size_t> test_idx;   // ascending complement
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;
};

// Uniform without-replacement train/test split, a deterministic function of
// (seed, iteration). Streams for distinct iterations are independent.
SplitPlan split(std::size_t n, std::size_t train_size, std::uint64_t seed,
                std::uint64_t iteration);

// Nearest-rank percentile on the sorted sample: rank = ceil(p/100 * n),
// 1-indexed; p = 0 returns the minimum. No interpolation.
double percentile(std::span<const double> values, double p);

}  // namespace embaudit
