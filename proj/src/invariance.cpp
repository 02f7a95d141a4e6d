#include "embaudit/invariance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <stdexcept>

#include "embaudit/stats.hpp"
#include "embaudit/svg.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace embaudit {

const char* condition_name(ConditionSpec::Kind k) {
    return k == ConditionSpec::Kind::frontal_vs_profile ? "frontal_vs_profile"
                                                        : "still_vs_video";
}

std::vector<Group> assign_groups(const Dataset& ds, const ConditionSpec& cond) {
    std::vector<Group> groups(ds.size(), Group::Neither);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const MetadataRecord& r = ds.metadata[i];
        if (cond.kind == ConditionSpec::Kind::frontal_vs_profile) {
            if (!r.yaw_deg) continue;
            const double a = std::fabs(*r.yaw_deg);
            if (a <= cond.frontal_max_absyaw) {
                groups[i] = Group::A;
            } else if (a >= cond.profile_min_absyaw) {
                groups[i] = Group::B;
            }
        } else {
            if (!r.media_type) continue;
            groups[i] = *r.media_type == MediaType::still ? Group::A : Group::B;
        }
    }
    return groups;
}

InvarianceMap compute_invariance_map(const Dataset& ds, const ConditionSpec& cond,
                                     std::size_t min_per_group, double alpha,
                                     int threads) {
    if (min_per_group < 2) {
        throw std::invalid_argument("compute_invariance_map: min_per_group must be >= 2");
    }
    if (cond.kind == ConditionSpec::Kind::frontal_vs_profile &&
        !(cond.frontal_max_absyaw < cond.profile_min_absyaw)) {
        throw std::invalid_argument(
            "compute_invariance_map: frontal_max_absyaw must be < profile_min_absyaw");
    }
    const auto groups = assign_groups(ds, cond);

    // Row indices per identity and group; sorted map gives label-sorted columns.
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
        by_identity;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.metadata[i].subject_id.empty()) continue;
        if (groups[i] == Group::A) {
            by_identity[ds.metadata[i].subject_id].first.push_back(i);
        } else if (groups[i] == Group::B) {
            by_identity[ds.metadata[i].subject_id].second.push_back(i);
        }
    }

    InvarianceMap map;
    map.condition = cond;
    map.min_per_group = min_per_group;
    map.alpha = alpha;
    map.feature_count = ds.dims();
    map.alpha_corrected = bonferroni_alpha(alpha, ds.dims());
    std::vector<const std::pair<std::vector<std::size_t>, std::vector<std::size_t>>*>
        qualifying;
    for (const auto& [subject, rows] : by_identity) {
        if (rows.first.size() >= min_per_group && rows.second.size() >= min_per_group) {
            map.identities.push_back(subject);
            map.n_group_a.push_back(rows.first.size());
            map.n_group_b.push_back(rows.second.size());
            qualifying.push_back(&rows);
        }
    }
    if (map.identities.empty()) {
        throw std::runtime_error(
            "compute_invariance_map: no identity has " + std::to_string(min_per_group) +
            "+ items in both groups of condition " + condition_name(cond.kind));
    }

    const std::size_t n_ident = map.identities.size();
    const std::size_t n_feat = map.feature_count;
    map.p_values.assign(n_feat * n_ident, 1.0);

    // Each column (identity) is independent; cells are written to exclusive
    // slots, so the result is schedule-independent.
    std::exception_ptr first_error = nullptr;
#ifdef _OPENMP
    const int n_threads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(n_threads)
#endif
    for (std::size_t c = 0; c < n_ident; ++c) {
        try {
            const auto& [rows_a, rows_b] = *qualifying[c];
            std::vector<double> a(rows_a.size());
            std::vector<double> b(rows_b.size());
            for (std::size_t f = 0; f < n_feat; ++f) {
                for (std::size_t i = 0; i < rows_a.size(); ++i) {
                    a[i] = ds.features.at(rows_a[i], f);
                }
                for (std::size_t i = 0; i < rows_b.size(); ++i) {
                    b[i] = ds.features.at(rows_b[i], f);
                }
                map.p_values[f * n_ident + c] = welch_t_test(a, b).p_value;
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
    if (first_error) std::rethrow_exception(first_error);
    return map;
}

InvarianceIndex invariance_index(const InvarianceMap& map) {
    InvarianceIndex index;
    index.identities = map.identities;
    index.n_group_a = map.n_group_a;
    index.n_group_b = map.n_group_b;
    const std::size_t n_ident = map.identities.size();
    index.fraction_significant.assign(n_ident, 0.0);
    index.fraction_undifferentiated.assign(n_ident, 0.0);
    for (std::size_t c = 0; c < n_ident; ++c) {
        std::size_t hits = 0;
        for (std::size_t f = 0; f < map.feature_count; ++f) {
            if (map.significant(f, c)) ++hits;
        }
        index.fraction_significant[c] =
            static_cast<double>(hits) / static_cast<double>(map.feature_count);
        index.fraction_undifferentiated[c] = 1.0 - index.fraction_significant[c];
    }
    return index;
}

std::vector<std::string> rank_invariant_identities(const InvarianceIndex& index,
                                                   std::size_t k) {
    if (k > index.identities.size()) {
        throw std::invalid_argument("rank_invariant_identities: k exceeds identity count");
    }
    std::vector<std::size_t> order(index.identities.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
        if (index.fraction_significant[lhs] != index.fraction_significant[rhs]) {
            return index.fraction_significant[lhs] < index.fraction_significant[rhs];
        }
        return index.identities[lhs] < index.identities[rhs];
    });
    std::vector<std::string> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(index.identities[order[i]]);
    return out;
}

void emit_heatmap(const InvarianceMap& map, const std::filesystem::path& path) {
    const std::size_t n_ident = map.identities.size();
    const std::size_t n_feat = map.feature_count;
    const double cell_w = 18.0;
    const double cell_h = std::max(1.0, 640.0 / static_cast<double>(n_feat));
    const double margin = 40.0;
    const double grid_w = cell_w * static_cast<double>(n_ident);
    const double grid_h = cell_h * static_cast<double>(n_feat);

    SvgWriter svg(grid_w + 2.0 * margin, grid_h + 2.0 * margin);
    for (std::size_t f = 0; f < n_feat; ++f) {
        for (std::size_t c = 0; c < n_ident; ++c) {
            // Display clamp only: raw p-values stay unclamped in the map.
            const double p = std::max(map.p(f, c), 1e-16);
            const double intensity = std::min(-std::log10(p) / 16.0, 1.0);
            const bool sig = map.significant(f, c);
            svg.rect(margin + cell_w * static_cast<double>(c),
                     margin + cell_h * static_cast<double>(f), cell_w, cell_h,
                     heat_hex(intensity), sig ? "#000000" : "", sig ? 0.4 : 0.0);
        }
    }
    if (n_ident <= 64) {
        for (std::size_t c = 0; c < n_ident; ++c) {
            svg.text(margin + cell_w * (static_cast<double>(c) + 0.5),
                     margin + grid_h + 14.0, map.identities[c], 8.0, "middle");
        }
    }
    svg.save(path);
}

void write_pvalue_csv(const InvarianceMap& map, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_pvalue_csv: cannot open " + path.string());
    }
    out << "feature";
    for (const auto& id : map.identities) out << ',' << id;
    out << "\n";
    char buf[40];
    for (std::size_t f = 0; f < map.feature_count; ++f) {
        out << 'f' << f;
        for (std::size_t c = 0; c < map.identities.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.9g", map.p(f, c));
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) {
        throw std::runtime_error("write_pvalue_csv: write failed for " + path.string());
    }
}

}  // namespace embaudit
