#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "embaudit/types.hpp"

namespace embaudit {

// A template is a pooled representation of one or more items that share an
// acquisition (same template_id), a subject, or a random grouping.
struct Template {
    std::string subject_id;
    std::string key;  // grouping key, unique within a subject
    std::vector<double> pooled;  // mean of member feature rows
    std::vector<std::size_t> members;  // row indices into the dataset
};

enum class TemplateGrouping {
    by_template_id,
    by_subject,
    random_split,
};

const char* template_grouping_name(TemplateGrouping g);

struct TemplateConfig {
    TemplateGrouping grouping = TemplateGrouping::by_template_id;
    std::size_t random_split_size = 8;  // items per template under random_split
    std::uint64_t seed = 0;             // used by random_split only
};

std::vector<Template> build_templates(const Dataset& ds, const TemplateConfig& config);

// Cosine similarity between pooled templates.
double template_similarity(const Template& a, const Template& b);

struct RocPoint {
    double far = 0.0;  // false accept rate
    double tar = 0.0;  // true accept rate
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // endpoints (0,0) and (1,1) included
    double auc = 0.0;
    std::size_t genuine_count = 0;
    std::size_t impostor_count = 0;
};

// Builds the ROC by sweeping thresholds over the distinct observed scores,
// descending; a pair is accepted when score >= threshold. AUC by trapezoid.
RocCurve roc(const std::vector<double>& genuine_scores,
             const std::vector<double>& impostor_scores);

struct VerificationConfig {
    TemplateConfig templates;
    // Identities ranked most invariant; their genuine/impostor pairs form the
    // "invariant" arm, everyone else's the "rest" arm. Pairs that straddle the
    // two sets count toward "rest".
    std::size_t top_k = 7;
    std::size_t impostor_cap = 100000;  // per arm; sampled with a seeded RNG
    std::uint64_t seed = 0;
    int threads = 0;
};

struct VerificationArm {
    RocCurve curve;
    std::size_t template_count = 0;
    std::size_t impostors_before_cap = 0;
};

struct VerificationReport {
    VerificationArm invariant;
    VerificationArm rest;
    std::vector<std::string> invariant_identities;
    double auc_gap = 0.0;  // invariant AUC minus rest AUC
};

// Compares verification quality for the most pose-invariant identities
// against all remaining identities.
VerificationReport compare_invariant_vs_rest(const Dataset& ds,
                                             const std::vector<std::string>& invariant_ids,
                                             const VerificationConfig& config);

// Convenience overload: takes the invariance map and ranks its top_k most
// invariant identities itself.
struct InvarianceMap;  // forward declared in invariance.hpp
VerificationReport compare_invariant_vs_rest(const Dataset& ds, const InvarianceMap& map,
                                             const VerificationConfig& config);

}  // namespace embaudit
