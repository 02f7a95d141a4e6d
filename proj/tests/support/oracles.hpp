#pragma once

// Independent reference implementations the unit suites check the library
// against. Nothing in here calls into the code paths under test: the t CDF
// oracle integrates the density by adaptive quadrature, the p-value oracle is
// a permutation test, correlation/purity are computed from first principles.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "embaudit/rng.hpp"

namespace oracles {

// ---- Student-t CDF by adaptive Simpson quadrature on the density ----

namespace detail {

struct TDensity {
    double df;
    double log_norm;
    explicit TDensity(double df_in)
        : df(df_in),
          log_norm(std::lgamma(0.5 * (df_in + 1.0)) - std::lgamma(0.5 * df_in) -
                   0.5 * std::log(df_in * 3.14159265358979323846)) {}
    double operator()(double x) const {
        return std::exp(log_norm - 0.5 * (df + 1.0) * std::log1p(x * x / df));
    }
};

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * eps) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double eps) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, eps, 60);
}

}  // namespace detail

inline double student_t_cdf_quadrature(double t, double df) {
    const detail::TDensity f(df);
    const double x = std::fabs(t);
    const double half = detail::integrate(f, 0.0, x, 1e-14);
    return t >= 0.0 ? 0.5 + half : 0.5 - half;
}

// ---- Two-sample permutation test on the mean difference ----

inline double permutation_p_value(const std::vector<double>& a,
                                  const std::vector<double>& b, std::size_t reps,
                                  std::uint64_t seed) {
    const double mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }(a);
    double mean_b = 0.0;
    for (double x : b) mean_b += x;
    mean_b /= static_cast<double>(b.size());
    const double observed = std::fabs(mean - mean_b);

    std::vector<double> pool = a;
    pool.insert(pool.end(), b.begin(), b.end());
    embaudit::Rng rng(seed);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        embaudit::shuffle(pool, rng);
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) sa += pool[i];
        for (std::size_t i = a.size(); i < pool.size(); ++i) sb += pool[i];
        const double diff = std::fabs(sa / static_cast<double>(a.size()) -
                                      sb / static_cast<double>(b.size()));
        if (diff >= observed) ++hits;
    }
    return static_cast<double>(hits + 1) / static_cast<double>(reps + 1);
}

// ---- Spearman rank correlation (average ranks, Pearson on ranks) ----

inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("spearman: need two equal-length samples, n >= 2");
    }
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (ra[i] - ma) * (rb[i] - mb);
        sxx += (ra[i] - ma) * (ra[i] - ma);
        syy += (rb[i] - mb) * (rb[i] - mb);
    }
    return sxy / std::sqrt(sxx * syy);
}

// ---- k-means on 2-D points + cluster purity ----

inline std::vector<int> kmeans_2d(const std::vector<double>& xy, std::size_t n, int k,
                                  std::uint64_t seed) {
    embaudit::Rng rng(seed);
    // k-means++ seeding.
    std::vector<double> cx(static_cast<std::size_t>(k)), cy(static_cast<std::size_t>(k));
    std::vector<double> d2(n, 0.0);
    const std::size_t first = rng.below(n);
    cx[0] = xy[2 * first];
    cy[0] = xy[2 * first + 1];
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = 1e300;
            for (int b = 0; b < c; ++b) {
                const double dx = xy[2 * i] - cx[static_cast<std::size_t>(b)];
                const double dy = xy[2 * i + 1] - cy[static_cast<std::size_t>(b)];
                best = std::min(best, dx * dx + dy * dy);
            }
            d2[i] = best;
            total += best;
        }
        double pick = rng.uniform() * total;
        std::size_t chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            pick -= d2[i];
            if (pick <= 0.0) {
                chosen = i;
                break;
            }
        }
        cx[static_cast<std::size_t>(c)] = xy[2 * chosen];
        cy[static_cast<std::size_t>(c)] = xy[2 * chosen + 1];
    }

    std::vector<int> assign(n, 0);
    for (int round = 0; round < 200; ++round) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = 1e300;
            int arg = 0;
            for (int c = 0; c < k; ++c) {
                const double dx = xy[2 * i] - cx[static_cast<std::size_t>(c)];
                const double dy = xy[2 * i + 1] - cy[static_cast<std::size_t>(c)];
                const double d = dx * dx + dy * dy;
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            if (assign[i] != arg) {
                assign[i] = arg;
                changed = true;
            }
        }
        std::vector<double> sx(static_cast<std::size_t>(k), 0.0);
        std::vector<double> sy(static_cast<std::size_t>(k), 0.0);
        std::vector<std::size_t> cnt(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assign[i]);
            sx[c] += xy[2 * i];
            sy[c] += xy[2 * i + 1];
            cnt[c] += 1;
        }
        for (int c = 0; c < k; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            if (cnt[ci] > 0) {
                cx[ci] = sx[ci] / static_cast<double>(cnt[ci]);
                cy[ci] = sy[ci] / static_cast<double>(cnt[ci]);
            }
        }
        if (!changed) break;
    }
    return assign;
}

inline double cluster_purity(const std::vector<int>& assign, const std::vector<int>& labels,
                             int k) {
    if (assign.size() != labels.size() || assign.empty()) {
        throw std::invalid_argument("cluster_purity: mismatched inputs");
    }
    int max_label = 0;
    for (int l : labels) max_label = std::max(max_label, l);
    std::vector<std::vector<std::size_t>> table(
        static_cast<std::size_t>(k),
        std::vector<std::size_t>(static_cast<std::size_t>(max_label) + 1, 0));
    for (std::size_t i = 0; i < assign.size(); ++i) {
        table[static_cast<std::size_t>(assign[i])][static_cast<std::size_t>(labels[i])]++;
    }
    std::size_t agree = 0;
    for (const auto& row : table) agree += *std::max_element(row.begin(), row.end());
    return static_cast<double>(agree) / static_cast<double>(assign.size());
}

// ---- Subprocess runner for CLI contract tests ----

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline RunResult run_process(const std::string& command, const std::string& work_dir) {
    const std::string out_path = work_dir + "/stdout.txt";
    const std::string err_path = work_dir + "/stderr.txt";
    const std::string full =
        "cd '" + work_dir + "' && " + command + " >'" + out_path + "' 2>'" + err_path + "'";
    const int status = std::system(full.c_str());
    RunResult r;
    if (status == -1) {
        r.exit_code = -1;
    } else if (WIFEXITED(status)) {
        r.exit_code = WEXITSTATUS(status);
    } else {
        r.exit_code = 128;
    }
    r.out = read_file(out_path);
    r.err = read_file(err_path);
    return r;
}

// ---- Minimal JSON-schema-subset validator ----
// Supports: type, properties, required, items, enum, minimum, additionalProperties
// (boolean form). Returns "" when the document conforms, else a diagnostic.

inline std::string validate_schema(const nlohmann::json& doc, const nlohmann::json& schema,
                                   const std::string& where = "$") {
    if (schema.contains("type")) {
        const std::string type = schema["type"].get<std::string>();
        const bool ok = (type == "object" && doc.is_object()) ||
                        (type == "array" && doc.is_array()) ||
                        (type == "string" && doc.is_string()) ||
                        (type == "number" && doc.is_number()) ||
                        (type == "integer" && doc.is_number_integer()) ||
                        (type == "boolean" && doc.is_boolean());
        if (!ok) return where + ": expected type " + type;
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& v : schema["enum"]) {
            if (v == doc) {
                found = true;
                break;
            }
        }
        if (!found) return where + ": value not in enum";
    }
    if (schema.contains("minimum") && doc.is_number()) {
        if (doc.get<double>() < schema["minimum"].get<double>()) {
            return where + ": below minimum";
        }
    }
    if (doc.is_object()) {
        if (schema.contains("required")) {
            for (const auto& key : schema["required"]) {
                if (!doc.contains(key.get<std::string>())) {
                    return where + ": missing required key " + key.get<std::string>();
                }
            }
        }
        if (schema.contains("properties")) {
            for (const auto& [key, sub] : schema["properties"].items()) {
                if (doc.contains(key)) {
                    const std::string res =
                        validate_schema(doc.at(key), sub, where + "." + key);
                    if (!res.empty()) return res;
                }
            }
            if (schema.contains("additionalProperties") &&
                schema["additionalProperties"].is_boolean() &&
                !schema["additionalProperties"].get<bool>()) {
                for (const auto& [key, value] : doc.items()) {
                    (void)value;
                    if (!schema["properties"].contains(key)) {
                        return where + ": unexpected key " + key;
                    }
                }
            }
        }
    }
    if (doc.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const std::string res = validate_schema(doc[i], schema["items"],
                                                    where + "[" + std::to_string(i) + "]");
            if (!res.empty()) return res;
        }
    }
    return "";
}

}  // namespace oracles
