#include "embaudit/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include "embaudit/invariance.hpp"
#include "embaudit/manifest.hpp"
#include "embaudit/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace embaudit {

namespace {

// Floyd's algorithm: k distinct indices from [0, n), deterministic for a
// fixed RNG state, returned sorted. O(k) memory, unlike a full shuffle.
std::vector<std::size_t> floyd_sample(std::size_t n, std::size_t k, Rng& rng) {
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(k * 2);
    for (std::size_t j = n - k; j < n; ++j) {
        const std::size_t t = rng.below(j + 1);
        chosen.insert(chosen.count(t) ? j : t);
    }
    std::vector<std::size_t> out(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::string random_key(const std::string& subject, std::size_t chunk) {
    return subject + "_r" + std::to_string(chunk);
}

}  // namespace

const char* template_grouping_name(TemplateGrouping g) {
    switch (g) {
        case TemplateGrouping::by_template_id: return "by_template_id";
        case TemplateGrouping::by_subject: return "by_subject";
        case TemplateGrouping::random_split: return "random_split";
    }
    return "?";
}

std::vector<Template> build_templates(const Dataset& ds, const TemplateConfig& config) {
    // subject -> key -> member rows, ordered for deterministic output.
    std::map<std::string, std::map<std::string, std::vector<std::size_t>>> grouped;

    for (std::size_t i = 0; i < ds.size(); ++i) {
        const MetadataRecord& r = ds.metadata[i];
        if (r.subject_id.empty()) continue;
        switch (config.grouping) {
            case TemplateGrouping::by_template_id:
                if (r.template_id) grouped[r.subject_id][*r.template_id].push_back(i);
                break;
            case TemplateGrouping::by_subject:
                grouped[r.subject_id][r.subject_id].push_back(i);
                break;
            case TemplateGrouping::random_split:
                // collected per subject first; chunked below
                grouped[r.subject_id][""].push_back(i);
                break;
        }
    }
    if (grouped.empty()) {
        throw std::runtime_error("build_templates: no item carries the metadata "
                                 "needed for grouping " +
                                 std::string(template_grouping_name(config.grouping)));
    }

    if (config.grouping == TemplateGrouping::random_split) {
        if (config.random_split_size == 0) {
            throw std::invalid_argument("build_templates: random_split size must be > 0");
        }
        for (auto& [subject, by_key] : grouped) {
            std::vector<std::size_t> rows = std::move(by_key[""]);
            by_key.clear();
            // Per-subject stream keyed by the label so the partition does not
            // depend on subject enumeration order.
            Rng rng(config.seed ^ fnv1a64(subject.data(), subject.size()));
            shuffle(rows, rng);
            for (std::size_t c = 0; c * config.random_split_size < rows.size(); ++c) {
                const std::size_t lo = c * config.random_split_size;
                const std::size_t hi =
                    std::min(rows.size(), lo + config.random_split_size);
                auto& members = by_key[random_key(subject, c)];
                members.assign(rows.begin() + static_cast<long>(lo),
                               rows.begin() + static_cast<long>(hi));
                std::sort(members.begin(), members.end());
            }
        }
    }

    std::vector<Template> templates;
    const std::size_t dims = ds.dims();
    for (const auto& [subject, by_key] : grouped) {
        for (const auto& [key, members] : by_key) {
            Template t;
            t.subject_id = subject;
            t.key = key;
            t.members = members;
            t.pooled.assign(dims, 0.0);
            for (std::size_t row : members) {
                const float* src = ds.features.row(row);
                for (std::size_t j = 0; j < dims; ++j) {
                    t.pooled[j] += static_cast<double>(src[j]);
                }
            }
            for (auto& v : t.pooled) v /= static_cast<double>(members.size());
            templates.push_back(std::move(t));
        }
    }
    return templates;
}

double template_similarity(const Template& a, const Template& b) {
    if (a.pooled.size() != b.pooled.size()) {
        throw std::invalid_argument("template_similarity: dimensionality mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.pooled.size(); ++j) {
        dot += a.pooled[j] * b.pooled[j];
        na += a.pooled[j] * a.pooled[j];
        nb += b.pooled[j] * b.pooled[j];
    }
    if (na == 0.0 || nb == 0.0) {
        throw std::runtime_error("template_similarity: zero-norm pooled feature");
    }
    return dot / std::sqrt(na * nb);
}

RocCurve roc(const std::vector<double>& genuine_scores,
             const std::vector<double>& impostor_scores) {
    if (genuine_scores.empty() || impostor_scores.empty()) {
        throw std::runtime_error("roc: need at least one genuine and one impostor pair");
    }
    std::vector<double> g = genuine_scores;
    std::vector<double> m = impostor_scores;
    std::sort(g.begin(), g.end());
    std::sort(m.begin(), m.end());

    std::vector<double> thresholds = g;
    thresholds.insert(thresholds.end(), m.begin(), m.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    RocCurve curve;
    curve.genuine_count = g.size();
    curve.impostor_count = m.size();
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    const double ng = static_cast<double>(g.size());
    const double nm = static_cast<double>(m.size());
    for (double t : thresholds) {
        // accepted = scores >= t
        const double tar =
            static_cast<double>(g.end() - std::lower_bound(g.begin(), g.end(), t)) / ng;
        const double far =
            static_cast<double>(m.end() - std::lower_bound(m.begin(), m.end(), t)) / nm;
        curve.points.push_back({far, tar, t});
    }
    // The lowest threshold accepts everything, so (1,1) is already present.
    double auc = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        auc += (b.far - a.far) * (a.tar + b.tar) * 0.5;
    }
    curve.auc = auc;
    return curve;
}

VerificationReport compare_invariant_vs_rest(const Dataset& ds,
                                             const std::vector<std::string>& invariant_ids,
                                             const VerificationConfig& config) {
    const std::vector<Template> templates = build_templates(ds, config.templates);
    const std::size_t n_tpl = templates.size();
    if (n_tpl < 2) {
        throw std::runtime_error("compare_invariant_vs_rest: fewer than 2 templates");
    }
    const std::unordered_set<std::string> top(invariant_ids.begin(), invariant_ids.end());

    // Pass 1 over the (i < j) pair grid: genuine pairs are kept outright,
    // impostor pairs only counted (the grid can be huge).
    std::vector<std::pair<std::size_t, std::size_t>> genuine[2];
    std::size_t impostor_total[2] = {0, 0};
    auto arm_of = [&](const Template& a, const Template& b) {
        return top.count(a.subject_id) && top.count(b.subject_id) ? 0 : 1;
    };
    for (std::size_t i = 0; i < n_tpl; ++i) {
        for (std::size_t j = i + 1; j < n_tpl; ++j) {
            const int arm = arm_of(templates[i], templates[j]);
            if (templates[i].subject_id == templates[j].subject_id) {
                genuine[arm].emplace_back(i, j);
            } else {
                ++impostor_total[arm];
            }
        }
    }

    // Seeded cap per arm; pass 2 picks the sampled impostor ordinals.
    std::vector<std::pair<std::size_t, std::size_t>> impostor[2];
    std::vector<std::size_t> wanted[2];
    bool capped[2] = {false, false};
    for (int arm = 0; arm < 2; ++arm) {
        if (impostor_total[arm] > config.impostor_cap) {
            Rng rng(stream_seed(config.seed, static_cast<std::uint64_t>(arm)));
            wanted[arm] = floyd_sample(impostor_total[arm], config.impostor_cap, rng);
            capped[arm] = true;
            impostor[arm].reserve(config.impostor_cap);
        } else {
            impostor[arm].reserve(impostor_total[arm]);
        }
    }
    std::size_t ordinal[2] = {0, 0};
    std::size_t cursor[2] = {0, 0};
    for (std::size_t i = 0; i < n_tpl; ++i) {
        for (std::size_t j = i + 1; j < n_tpl; ++j) {
            if (templates[i].subject_id == templates[j].subject_id) continue;
            const int arm = arm_of(templates[i], templates[j]);
            if (capped[arm]) {
                if (cursor[arm] < wanted[arm].size() &&
                    wanted[arm][cursor[arm]] == ordinal[arm]) {
                    impostor[arm].emplace_back(i, j);
                    ++cursor[arm];
                }
            } else {
                impostor[arm].emplace_back(i, j);
            }
            ++ordinal[arm];
        }
    }

    VerificationReport report;
    report.invariant_identities = invariant_ids;
    for (int arm = 0; arm < 2; ++arm) {
        const char* arm_name = arm == 0 ? "invariant" : "rest";
        if (genuine[arm].empty()) {
            throw std::runtime_error(std::string("compare_invariant_vs_rest: the ") +
                                     arm_name + " set has no genuine pairs");
        }
        if (impostor[arm].empty()) {
            throw std::runtime_error(std::string("compare_invariant_vs_rest: the ") +
                                     arm_name + " set has no impostor pairs");
        }
        auto score_all = [&](const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
            std::vector<double> scores(pairs.size());
#ifdef _OPENMP
            const int n_threads =
                config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(n_threads)
#endif
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                scores[p] =
                    template_similarity(templates[pairs[p].first], templates[pairs[p].second]);
            }
            return scores;
        };
        VerificationArm& out = arm == 0 ? report.invariant : report.rest;
        out.curve = roc(score_all(genuine[arm]), score_all(impostor[arm]));
        out.impostors_before_cap = impostor_total[arm];

        std::unordered_set<std::size_t> used;
        for (const auto& [i, j] : genuine[arm]) {
            used.insert(i);
            used.insert(j);
        }
        for (const auto& [i, j] : impostor[arm]) {
            used.insert(i);
            used.insert(j);
        }
        out.template_count = used.size();
    }
    report.auc_gap = report.invariant.curve.auc - report.rest.curve.auc;
    return report;
}

VerificationReport compare_invariant_vs_rest(const Dataset& ds, const InvarianceMap& map,
                                             const VerificationConfig& config) {
    const auto ranked = rank_invariant_identities(invariance_index(map), config.top_k);
    return compare_invariant_vs_rest(ds, ranked, config);
}

}  // namespace embaudit
