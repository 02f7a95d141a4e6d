#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "embaudit/types.hpp"

namespace embaudit {

// Reference point the distance index is measured from.
enum class CenterKind {
    origin,    // all-zeros vector (default)
    centroid,  // mean of all feature rows
};

const char* center_kind_name(CenterKind c);

struct QualityEntry {
    std::string item_id;
    std::size_t row = 0;   // row index into the source feature matrix
    double distance = 0.0; // Euclidean distance from the center
};

struct QualityRanking {
    CenterKind center = CenterKind::origin;
    std::vector<QualityEntry> entries;  // ascending distance; ties by item_id
};

// Ranks items by Euclidean distance of the raw (unnormalized) feature vector
// from the chosen center. Smaller distance = lower quality index.
QualityRanking rank_by_center_distance(const FeatureMatrix& features,
                                       CenterKind center = CenterKind::origin);

// First k entries of the ranking (the lowest-distance items).
std::vector<QualityEntry> head(const QualityRanking& ranking, std::size_t k);

// k = round(fraction * n) entries from the low end.
std::vector<QualityEntry> head_fraction(const QualityRanking& ranking, double fraction);

// A contiguous run of `count` entries centered on rank index
// ceil(p/100 * n) of the ascending ranking (p = 0 maps to the minimum). The
// window start is clamped to [0, n - count] so the band always fits.
std::vector<QualityEntry> percentile_band(const QualityRanking& ranking, double percentile,
                                          std::size_t count);

}  // namespace embaudit
