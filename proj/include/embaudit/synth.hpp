#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "embaudit/types.hpp"

namespace embaudit {

// Shape of the planted yaw signal along each identity's pose direction.
enum class YawShape {
    sine,    // sin(|yaw| in radians): saturating, like a view-angle cue
    linear,  // |yaw| directly, so a linear probe can recover it exactly
};

const char* yaw_shape_name(YawShape s);

struct SynthSpec {
    std::size_t n_identities = 50;
    std::size_t items_per_identity = 50;
    std::size_t dims = 64;

    double centroid_scale = 10.0;   // sd of identity centroid coordinates
    double feature_noise = 1.0;     // isotropic per-dim noise sd

    // Pose signal: written onto a per-identity unit direction for identities
    // that are NOT in the invariant set. Magnitude is yaw_scale * shape(|yaw|)
    // plus yaw channel noise of sd yaw_noise_deg (in degrees, pre-shape for
    // linear so the probe's irreducible error is exactly that noise).
    double yaw_scale = 1.0;
    double yaw_noise_deg = 0.0;
    YawShape yaw_shape = YawShape::sine;

    // Media signal: a fixed direction shift added to still items.
    double media_shift = 1.0;

    // Fraction of identities (rounded) that are pose-invariant: no pose
    // component and noise divided by invariant_snr_boost.
    double invariant_fraction = 0.0;
    double invariant_snr_boost = 1.0;

    // Per-item quality multiplier drawn uniformly in [quality_lo, quality_hi];
    // the finished vector is rescaled so its norm equals exactly
    // quality * ||unscaled||-normalized direction when lo != hi.
    double quality_lo = 1.0;
    double quality_hi = 1.0;

    double still_prob = 0.5;        // probability an item is a still image
    std::size_t template_size = 5;  // consecutive same-subject items per template

    double yaw_min = -90.0;
    double yaw_max = 90.0;
    double pitch_sd = 10.0;
    double roll_sd = 5.0;

    std::uint64_t seed = 1;
};

// Everything the generator planted, for verifying recovered structure.
struct GroundTruth {
    std::vector<std::string> subject_ids;               // per identity
    std::unordered_set<std::string> invariant_subjects; // planted invariant set
    std::vector<double> quality;                        // per item, the planted norm scale
    std::vector<double> yaw;                            // per item
    std::vector<int> identity_of_item;                  // per item
};

struct SynthResult {
    Dataset dataset;
    GroundTruth truth;
};

SynthResult generate(const SynthSpec& spec);

}  // namespace embaudit
