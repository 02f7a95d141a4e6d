#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "embaudit/types.hpp"

namespace embaudit {

// Two-group viewing condition. For frontal_vs_profile the yaw thresholds
// leave a buffer zone: items with frontal_max_absyaw < |yaw| <
// profile_min_absyaw belong to neither group.
struct ConditionSpec {
    enum class Kind { frontal_vs_profile, still_vs_video };
    Kind kind = Kind::frontal_vs_profile;
    double frontal_max_absyaw = 20.0;
    double profile_min_absyaw = 60.0;
};

const char* condition_name(ConditionSpec::Kind k);

enum class Group : std::uint8_t { A, B, Neither };

// Per-item group labels. frontal_vs_profile: |yaw| <= frontal_max -> A,
// |yaw| >= profile_min -> B, else (or missing yaw) Neither.
// still_vs_video: still -> A, video -> B, missing media -> Neither.
std::vector<Group> assign_groups(const Dataset& ds, const ConditionSpec& cond);

// Identity x feature grid of two-sample t-test p-values: for each qualifying
// identity and each feature dimension, group A values vs group B values of
// that identity's items. Rows are features, columns are identities.
struct InvarianceMap {
    std::vector<std::string> identities;  // columns, sorted by label
    std::size_t feature_count = 0;        // rows
    std::vector<double> p_values;         // feature_count x identities, row-major
    double alpha = 0.05;
    double alpha_corrected = 0.0;  // alpha / feature_count
    ConditionSpec condition;
    std::size_t min_per_group = 20;
    std::vector<std::size_t> n_group_a;  // per identity
    std::vector<std::size_t> n_group_b;

    double p(std::size_t feature, std::size_t identity) const {
        return p_values[feature * identities.size() + identity];
    }
    bool significant(std::size_t feature, std::size_t identity) const {
        return p(feature, identity) < alpha_corrected;
    }
};

InvarianceMap compute_invariance_map(const Dataset& ds, const ConditionSpec& cond,
                                     std::size_t min_per_group = 20, double alpha = 0.05,
                                     int threads = 0);

struct InvarianceIndex {
    std::vector<std::string> identities;
    std::vector<double> fraction_significant;      // significant features / D
    std::vector<double> fraction_undifferentiated; // complement
    std::vector<std::size_t> n_group_a;
    std::vector<std::size_t> n_group_b;
};

InvarianceIndex invariance_index(const InvarianceMap& map);

// The k identities with the smallest fraction of significant features;
// ties broken by identity label ascending.
std::vector<std::string> rank_invariant_identities(const InvarianceIndex& index,
                                                   std::size_t k = 7);

// SVG heat map: rows = features, columns = identities; cell color encodes
// -log10(p) clamped at 16; significant cells outlined. Byte-deterministic
// for a fixed map.
void emit_heatmap(const InvarianceMap& map, const std::filesystem::path& path);

// CSV of p-values: header row of identity labels, one row per feature.
void write_pvalue_csv(const InvarianceMap& map, const std::filesystem::path& path);

}  // namespace embaudit
