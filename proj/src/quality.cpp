#include "embaudit/quality.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace embaudit {

const char* center_kind_name(CenterKind c) {
    return c == CenterKind::origin ? "origin" : "centroid";
}

QualityRanking rank_by_center_distance(const FeatureMatrix& features, CenterKind center) {
    if (features.rows == 0) {
        throw std::invalid_argument("rank_by_center_distance: empty feature matrix");
    }
    std::vector<double> center_vec(features.cols, 0.0);
    if (center == CenterKind::centroid) {
        for (std::size_t i = 0; i < features.rows; ++i) {
            const float* row = features.row(i);
            for (std::size_t j = 0; j < features.cols; ++j) {
                center_vec[j] += static_cast<double>(row[j]);
            }
        }
        for (auto& c : center_vec) c /= static_cast<double>(features.rows);
    }

    QualityRanking ranking;
    ranking.center = center;
    ranking.entries.resize(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        const float* row = features.row(i);
        double d2 = 0.0;
        for (std::size_t j = 0; j < features.cols; ++j) {
            const double d = static_cast<double>(row[j]) - center_vec[j];
            d2 += d * d;
        }
        ranking.entries[i] = {features.item_ids[i], i, std::sqrt(d2)};
    }
    std::sort(ranking.entries.begin(), ranking.entries.end(),
              [](const QualityEntry& a, const QualityEntry& b) {
                  if (a.distance != b.distance) return a.distance < b.distance;
                  return a.item_id < b.item_id;
              });
    return ranking;
}

std::vector<QualityEntry> head(const QualityRanking& ranking, std::size_t k) {
    if (k > ranking.entries.size()) {
        throw std::invalid_argument("head: count exceeds item count");
    }
    return {ranking.entries.begin(), ranking.entries.begin() + static_cast<long>(k)};
}

std::vector<QualityEntry> head_fraction(const QualityRanking& ranking, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("head_fraction: fraction must lie in [0,1]");
    }
    const auto k = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(ranking.entries.size())));
    return head(ranking, k);
}

std::vector<QualityEntry> percentile_band(const QualityRanking& ranking, double percentile,
                                          std::size_t count) {
    const std::size_t n = ranking.entries.size();
    if (count > n) {
        throw std::invalid_argument("percentile_band: count exceeds item count");
    }
    if (!(percentile >= 0.0 && percentile <= 100.0)) {
        throw std::invalid_argument("percentile_band: percentile must lie in [0,100]");
    }
    if (count == 0) return {};
    // Center index ceil(p/100 * n) into the 0-indexed ranking; p = 0 maps to
    // the minimum and the window start is clamped so the band always fits.
    const long center = static_cast<long>(
        std::ceil(percentile * static_cast<double>(n) / 100.0));
    long start = center - static_cast<long>(count / 2);
    start = std::clamp<long>(start, 0, static_cast<long>(n - count));
    return {ranking.entries.begin() + start,
            ranking.entries.begin() + start + static_cast<long>(count)};
}

}  // namespace embaudit
