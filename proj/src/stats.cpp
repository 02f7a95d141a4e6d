#include "embaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "embaudit/rng.hpp"

namespace embaudit {

namespace {

struct Moments {
    double mean;
    double var;  // sample variance, n-1 denominator
};

Moments moments(std::span<const double> x) {
    const std::size_t n = x.size();
    double sum = 0.0;
    for (double v : x) sum += v;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) {
        const double d = v - mean;
        ss += d * d;
    }
    return {mean, n > 1 ? ss / static_cast<double>(n - 1) : 0.0};
}

// Continued fraction for the incomplete beta function (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr int max_iter = 500;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::invalid_argument("regularized_incomplete_beta: a and b must be positive");
    }
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * betacf(a, b, x) / a;
    }
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) {
        throw std::invalid_argument("student_t_cdf: df must be positive");
    }
    if (t == 0.0) return 0.5;
    const double x = df / (df + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

double bonferroni_alpha(double alpha, std::size_t m) {
    if (m < 1) throw std::invalid_argument("bonferroni_alpha: m must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("bonferroni_alpha: alpha must lie in (0,1)");
    }
    return alpha / static_cast<double>(m);
}

TTestResult t_test(std::span<const double> a, std::span<const double> b, TTestKind kind) {
    if (a.size() < 2 || b.size() < 2) {
        throw std::invalid_argument("t_test: both samples need at least 2 elements");
    }
    const auto ma = moments(a);
    const auto mb = moments(b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());

    TTestResult r;
    r.mean_a = ma.mean;
    r.mean_b = mb.mean;
    r.n_a = a.size();
    r.n_b = b.size();

    double se2 = 0.0;
    if (kind == TTestKind::welch) {
        se2 = ma.var / na + mb.var / nb;
        if (se2 > 0.0) {
            const double ta = ma.var / na;
            const double tb = mb.var / nb;
            r.df = se2 * se2 /
                   (ta * ta / (na - 1.0) + tb * tb / (nb - 1.0));
        }
    } else {
        const double sp2 = ((na - 1.0) * ma.var + (nb - 1.0) * mb.var) / (na + nb - 2.0);
        se2 = sp2 * (1.0 / na + 1.0 / nb);
        r.df = na + nb - 2.0;
    }

    if (se2 <= 0.0) {
        // Both samples constant. Convention keeps p finite and maps free of NaN.
        if (ma.mean == mb.mean) {
            r.t_stat = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_stat = ma.mean > mb.mean ? std::numeric_limits<double>::infinity()
                                         : -std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        r.df = 0.0;
        return r;
    }

    r.t_stat = (ma.mean - mb.mean) / std::sqrt(se2);
    if (r.t_stat == 0.0) {
        r.p_value = 1.0;
    } else {
        // Two-tailed p = I_{df/(df+t^2)}(df/2, 1/2), evaluated directly for
        // accuracy in the far tail.
        r.p_value = regularized_incomplete_beta(0.5 * r.df, 0.5,
                                                r.df / (r.df + r.t_stat * r.t_stat));
    }
    r.p_value = std::clamp(r.p_value, 0.0, 1.0);
    return r;
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    return t_test(a, b, TTestKind::welch);
}

SplitPlan split(std::size_t n, std::size_t train_size, std::uint64_t seed,
                std::uint64_t iteration) {
    if (train_size == 0 || train_size >= n) {
        throw std::invalid_argument("split: train_size must satisfy 0 < train_size < n");
    }
    Rng rng(stream_seed(seed, iteration));
    SplitPlan plan;
    plan.seed = seed;
    plan.iteration = iteration;
    plan.train_idx = sample_without_replacement(n, train_size, rng);
    plan.test_idx.reserve(n - train_size);
    std::size_t next_train = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (next_train < plan.train_idx.size() && plan.train_idx[next_train] == i) {
            ++next_train;
        } else {
            plan.test_idx.push_back(i);
        }
    }
    return plan;
}

double percentile(std::span<const double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile: empty sample");
    if (!(p >= 0.0 && p <= 100.0)) {
        throw std::invalid_argument("percentile: p must lie in [0,100]");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::size_t rank = 1;
    if (p > 0.0) {
        rank = static_cast<std::size_t>(
            std::ceil(p * static_cast<double>(n) / 100.0));
        rank = std::clamp<std::size_t>(rank, 1, n);
    }
    return sorted[rank - 1];
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.below(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace embaudit
