#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace embaudit {

// Dense row-major matrix of embedding features, one row per item.
// Values are stored as float32 (the on-disk precision of the EMAT format);
// analyses accumulate in double.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> values;          // rows * cols, row-major
    std::vector<std::string> item_ids;  // aligned to rows

    const float* row(std::size_t i) const { return values.data() + i * cols; }
    float* row(std::size_t i) { return values.data() + i * cols; }
    double at(std::size_t i, std::size_t j) const {
        return static_cast<double>(values[i * cols + j]);
    }
};

// Row-major double matrix used for model fitting and embeddings.
struct DMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // rows * cols, row-major

    DMatrix() = default;
    DMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    const double* row(std::size_t i) const { return values.data() + i * cols; }
    double* row(std::size_t i) { return values.data() + i * cols; }
};

enum class MediaType { still, video_frame };

const char* media_type_name(MediaType m);  // "still" / "video"

struct MetadataRecord {
    std::string item_id;
    std::string subject_id;  // empty = missing
    std::optional<MediaType> media_type;
    std::optional<double> yaw_deg;  // in [-90, +90] when present
    std::optional<double> pitch_deg;
    std::optional<double> roll_deg;
    std::optional<std::string> template_id;
};

// Metadata fields an analysis can require at join time.
enum class Field { subject_id, media_type, yaw_deg, pitch_deg, roll_deg, template_id };

const char* field_name(Field f);
bool has_field(const MetadataRecord& r, Field f);

struct DroppedItem {
    std::string item_id;
    std::string reason;  // missing_features | missing_metadata | missing_field:<name>

    bool operator==(const DroppedItem&) const = default;
};

// Joined features + metadata. Immutable after construction; the dropped
// ledger accounts for every item excluded by the join.
struct Dataset {
    FeatureMatrix features;
    std::vector<MetadataRecord> metadata;  // aligned to feature rows
    std::vector<DroppedItem> dropped;

    std::size_t size() const { return metadata.size(); }
    std::size_t dims() const { return features.cols; }
};

}  // namespace embaudit
