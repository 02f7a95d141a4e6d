#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "embaudit/types.hpp"

namespace embaudit {

// What a probe tries to read out of the feature space.
enum class ProbeTask {
    yaw_abs,       // regression onto |yaw_deg|
    pitch_band,    // 0 if pitch in [-8, +8] (inclusive), 1 otherwise
    media,         // 1 = still, 0 = video
};

const char* probe_task_name(ProbeTask task);

enum class ProbeModel {
    least_squares,  // ridge regression; binary targets rounded at 0.5
    lda,            // binary Gaussian LDA with shrinkage (classification tasks only)
};

const char* probe_model_name(ProbeModel model);

// Per-item probe target. `usable[i]` is false when the metadata needed for
// the task is absent on item i; such rows are skipped, not imputed.
struct TargetVector {
    std::vector<double> targets;
    std::vector<char> usable;
    bool classification = false;
    std::size_t usable_count = 0;
};

TargetVector make_target(const Dataset& ds, ProbeTask task,
                         double pitch_band_min = -8.0, double pitch_band_max = 8.0);

// Trained linear readout: y ~ w . x + b.
struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    bool classification = false;
    double threshold = 0.5;  // decision point for classification predictions
};

// Ridge least-squares fit on the given rows (indices into ds.features).
LinearModel fit_least_squares(const FeatureMatrix& features,
                              const std::vector<double>& targets,
                              const std::vector<std::size_t>& rows, double ridge_lambda,
                              bool classification);

// Two-class Gaussian LDA with shrinkage toward the identity covariance.
// Targets must be 0/1 on the training rows.
LinearModel fit_lda_binary(const FeatureMatrix& features,
                           const std::vector<double>& targets,
                           const std::vector<std::size_t>& rows, double shrinkage);

double predict(const LinearModel& model, const float* x, std::size_t dims);

struct ProbeConfig {
    ProbeTask task = ProbeTask::yaw_abs;
    ProbeModel model = ProbeModel::least_squares;
    std::size_t iterations = 20;
    // Absolute train-set size. When the usable-row count is smaller than
    // train_count + 2, the split falls back to train_fraction of the rows.
    std::size_t train_count = 18000;
    double train_fraction = 18000.0 / 24502.0;
    std::uint64_t seed = 0;
    double ridge_lambda = 1e-3;
    double lda_shrinkage = 1e-3;
    // When true, the yaw task is handled as multiclass LDA over fixed-width
    // yaw bins and scored by reconstructing the bin-center prediction.
    bool yaw_binned_lda = false;
    double yaw_bin_width = 10.0;
    double pitch_band_min = -8.0;
    double pitch_band_max = 8.0;
    int threads = 0;  // 0 = library default
};

struct ProbeIteration {
    std::size_t iteration = 0;
    double metric = 0.0;  // MAE in degrees (regression), percent correct (classification)
};

struct ProbeReport {
    ProbeTask task = ProbeTask::yaw_abs;
    ProbeModel model = ProbeModel::least_squares;
    bool classification = false;
    std::size_t usable_items = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    std::vector<ProbeIteration> per_iteration;
    double metric_mean = 0.0;
    double metric_sd = 0.0;  // sample sd (n-1) over iterations
};

// Bootstrapped linear probe: repeated seeded train/test splits, one model per
// split, mean +/- sd of the test metric across iterations.
ProbeReport run_probe(const Dataset& ds, const ProbeConfig& config);

}  // namespace embaudit
