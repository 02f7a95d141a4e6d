#include "embaudit/synth.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "embaudit/rng.hpp"

namespace embaudit {

namespace {

constexpr double kDegToRad = 0.01745329251994329577;

std::vector<double> random_unit(std::size_t dims, Rng& rng) {
    std::vector<double> v(dims);
    double norm2 = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm2 += x * x;
    }
    if (norm2 == 0.0) {
        v[0] = 1.0;
        norm2 = 1.0;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : v) x *= inv;
    return v;
}

std::string label(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%04zu", prefix, i);
    return buf;
}

}  // namespace

const char* yaw_shape_name(YawShape s) {
    return s == YawShape::sine ? "sine" : "linear";
}

SynthResult generate(const SynthSpec& spec) {
    if (spec.n_identities == 0 || spec.items_per_identity == 0 || spec.dims == 0) {
        throw std::invalid_argument(
            "generate: n_identities, items_per_identity and dims must be positive");
    }
    if (!(spec.quality_hi >= spec.quality_lo) || !(spec.quality_lo > 0.0)) {
        throw std::invalid_argument("generate: need 0 < quality_lo <= quality_hi");
    }
    if (!(spec.invariant_fraction >= 0.0 && spec.invariant_fraction <= 1.0)) {
        throw std::invalid_argument("generate: invariant_fraction must lie in [0,1]");
    }
    if (!(spec.invariant_snr_boost > 0.0)) {
        throw std::invalid_argument("generate: invariant_snr_boost must be positive");
    }
    if (!(spec.yaw_max >= spec.yaw_min)) {
        throw std::invalid_argument("generate: yaw_max must be >= yaw_min");
    }
    if (spec.template_size == 0) {
        throw std::invalid_argument("generate: template_size must be positive");
    }

    // One RNG stream, draws in a fixed documented order: media direction,
    // invariant subset, per-identity centroid + pose direction, then per item
    // yaw, pitch, roll, media, quality, yaw noise, per-dim feature noise.
    Rng rng(spec.seed);
    const std::size_t n_items = spec.n_identities * spec.items_per_identity;
    const std::size_t dims = spec.dims;

    const std::vector<double> media_dir = random_unit(dims, rng);

    const std::size_t n_invariant = static_cast<std::size_t>(
        std::llround(spec.invariant_fraction * static_cast<double>(spec.n_identities)));
    const auto invariant_idx =
        sample_without_replacement(spec.n_identities, n_invariant, rng);
    std::vector<char> is_invariant(spec.n_identities, 0);
    for (std::size_t i : invariant_idx) is_invariant[i] = 1;

    std::vector<std::vector<double>> centroids(spec.n_identities);
    std::vector<std::vector<double>> pose_dirs(spec.n_identities);
    for (std::size_t id = 0; id < spec.n_identities; ++id) {
        centroids[id].resize(dims);
        for (auto& c : centroids[id]) c = spec.centroid_scale * rng.normal();
        pose_dirs[id] = random_unit(dims, rng);
    }

    SynthResult out;
    out.dataset.features.rows = n_items;
    out.dataset.features.cols = dims;
    out.dataset.features.values.resize(n_items * dims);
    out.dataset.features.item_ids.reserve(n_items);
    out.dataset.metadata.reserve(n_items);
    out.truth.quality.reserve(n_items);
    out.truth.yaw.reserve(n_items);
    out.truth.identity_of_item.reserve(n_items);

    for (std::size_t id = 0; id < spec.n_identities; ++id) {
        const std::string subject = label("s", id);
        out.truth.subject_ids.push_back(subject);
        if (is_invariant[id]) out.truth.invariant_subjects.insert(subject);
    }

    const bool quality_gradient = spec.quality_hi > spec.quality_lo;
    std::vector<double> v(dims);

    for (std::size_t id = 0; id < spec.n_identities; ++id) {
        const std::string& subject = out.truth.subject_ids[id];
        const double noise_sd = is_invariant[id]
                                    ? spec.feature_noise / spec.invariant_snr_boost
                                    : spec.feature_noise;
        for (std::size_t e = 0; e < spec.items_per_identity; ++e) {
            const std::size_t item = id * spec.items_per_identity + e;

            const double yaw = rng.uniform(spec.yaw_min, spec.yaw_max);
            const double pitch = spec.pitch_sd * rng.normal();
            const double roll = spec.roll_sd * rng.normal();
            const bool still = rng.bernoulli(spec.still_prob);
            const double quality = rng.uniform(spec.quality_lo, spec.quality_hi);
            const double yaw_noise = spec.yaw_noise_deg > 0.0
                                         ? spec.yaw_noise_deg * rng.normal()
                                         : 0.0;

            // Pose magnitude along the identity's pose direction. Invariant
            // identities carry no pose component at all.
            double pose_mag = 0.0;
            if (!is_invariant[id] && spec.yaw_scale != 0.0) {
                const double noisy_absyaw = std::fabs(yaw) + yaw_noise;
                const double shaped = spec.yaw_shape == YawShape::sine
                                          ? std::sin(noisy_absyaw * kDegToRad)
                                          : noisy_absyaw;
                pose_mag = spec.yaw_scale * shaped;
            }

            const double media_mag = still ? spec.media_shift : 0.0;
            const std::vector<double>& pose_dir = pose_dirs[id];
            const std::vector<double>& centroid = centroids[id];
            double norm2 = 0.0;
            for (std::size_t d = 0; d < dims; ++d) {
                v[d] = centroid[d] + pose_mag * pose_dir[d] + media_mag * media_dir[d] +
                       noise_sd * rng.normal();
                norm2 += v[d] * v[d];
            }

            // Quality acts multiplicatively on the whole vector. When a
            // gradient is requested the vector is renormalized so its norm is
            // exactly the drawn quality value, which makes the planted ranking
            // recoverable without noise.
            double scale = quality;
            if (quality_gradient) {
                if (norm2 == 0.0) {
                    v[0] = 1.0;
                    norm2 = 1.0;
                }
                scale = quality / std::sqrt(norm2);
            }
            float* row = out.dataset.features.row(item);
            for (std::size_t d = 0; d < dims; ++d) {
                row[d] = static_cast<float>(scale * v[d]);
            }

            char ebuf[16];
            std::snprintf(ebuf, sizeof(ebuf), "_e%04zu", e);
            MetadataRecord rec;
            rec.item_id = subject + ebuf;
            rec.subject_id = subject;
            rec.media_type = still ? MediaType::still : MediaType::video_frame;
            rec.yaw_deg = yaw;
            rec.pitch_deg = pitch;
            rec.roll_deg = roll;
            char tbuf[16];
            std::snprintf(tbuf, sizeof(tbuf), "_t%04zu", e / spec.template_size);
            rec.template_id = subject + tbuf;
            out.dataset.features.item_ids.push_back(rec.item_id);
            out.dataset.metadata.push_back(std::move(rec));

            out.truth.quality.push_back(quality);
            out.truth.yaw.push_back(yaw);
            out.truth.identity_of_item.push_back(static_cast<int>(id));
        }
    }

    return out;
}

}  // namespace embaudit
