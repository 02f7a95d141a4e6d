#include "embaudit/probes.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>

#include "embaudit/stats.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace embaudit {

namespace {

Eigen::MatrixXd gather_rows(const FeatureMatrix& features,
                            const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(features.cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const float* src = features.row(rows[i]);
        for (std::size_t j = 0; j < features.cols; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = src[j];
        }
    }
    return x;
}

// Pooled within-class scatter over the given per-class row lists, shrunk
// toward a scaled identity: S' = (1-gamma) S + gamma (tr S / D) I.
Eigen::MatrixXd shrunk_pooled_covariance(const FeatureMatrix& features,
                                         const std::vector<std::vector<std::size_t>>& classes,
                                         const std::vector<Eigen::VectorXd>& means,
                                         double shrinkage) {
    const auto d = static_cast<Eigen::Index>(features.cols);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
    std::size_t n = 0;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        if (classes[k].empty()) continue;
        Eigen::MatrixXd xc = gather_rows(features, classes[k]);
        xc.rowwise() -= means[k].transpose();
        s.noalias() += xc.transpose() * xc;
        n += classes[k].size();
    }
    const std::size_t populated =
        static_cast<std::size_t>(std::count_if(classes.begin(), classes.end(),
                                               [](const auto& c) { return !c.empty(); }));
    if (n <= populated) {
        throw std::invalid_argument("lda: need at least 2 items in some class");
    }
    s /= static_cast<double>(n - populated);
    const double trace_mean = s.trace() / static_cast<double>(d);
    s *= (1.0 - shrinkage);
    s.diagonal().array() += shrinkage * std::max(trace_mean, 1e-300);
    return s;
}

// Multiclass Gaussian LDA over fixed-width |yaw| bins; prediction is the
// center of the winning bin. Internal to the binned-yaw probe variant.
struct BinnedYawModel {
    std::vector<double> centers;        // per populated bin
    Eigen::MatrixXd a;                  // D x bins, column k = Sigma^-1 mu_k
    std::vector<double> c;              // per bin constant term
};

BinnedYawModel fit_binned_yaw(const FeatureMatrix& features,
                              const std::vector<double>& absyaw,
                              const std::vector<std::size_t>& rows, double bin_width,
                              double shrinkage) {
    if (!(bin_width > 0.0)) {
        throw std::invalid_argument("binned yaw: bin_width must be positive");
    }
    const std::size_t n_bins = static_cast<std::size_t>(std::ceil(90.0 / bin_width));
    std::vector<std::vector<std::size_t>> bins(n_bins);
    for (std::size_t r : rows) {
        auto b = static_cast<std::size_t>(absyaw[r] / bin_width);
        if (b >= n_bins) b = n_bins - 1;  // |yaw| == 90 lands in the last bin
        bins[b].push_back(r);
    }

    // Keep only populated bins; empty ones contribute no class.
    std::vector<std::vector<std::size_t>> classes;
    BinnedYawModel model;
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (bins[b].empty()) continue;
        classes.push_back(std::move(bins[b]));
        model.centers.push_back((static_cast<double>(b) + 0.5) * bin_width);
    }
    if (classes.size() < 2) {
        throw std::invalid_argument("binned yaw: training data spans fewer than 2 bins");
    }

    const auto d = static_cast<Eigen::Index>(features.cols);
    std::vector<Eigen::VectorXd> means(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
        means[k] = gather_rows(features, classes[k]).colwise().mean();
    }
    const Eigen::MatrixXd sigma =
        shrunk_pooled_covariance(features, classes, means, shrinkage);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
    if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error("binned yaw: covariance factorization failed");
    }

    const std::size_t n_train = rows.size();
    model.a.resize(d, static_cast<Eigen::Index>(classes.size()));
    model.c.resize(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
        const Eigen::VectorXd ak = ldlt.solve(means[k]);
        model.a.col(static_cast<Eigen::Index>(k)) = ak;
        model.c[k] = -0.5 * means[k].dot(ak) +
                     std::log(static_cast<double>(classes[k].size()) /
                              static_cast<double>(n_train));
    }
    return model;
}

double predict_binned_yaw(const BinnedYawModel& model, const float* x, std::size_t dims) {
    Eigen::VectorXd xv(static_cast<Eigen::Index>(dims));
    for (std::size_t j = 0; j < dims; ++j) xv(static_cast<Eigen::Index>(j)) = x[j];
    const Eigen::VectorXd scores =
        model.a.transpose() * xv + Eigen::Map<const Eigen::VectorXd>(
                                       model.c.data(), static_cast<Eigen::Index>(model.c.size()));
    Eigen::Index best = 0;
    scores.maxCoeff(&best);
    return model.centers[static_cast<std::size_t>(best)];
}

}  // namespace

const char* probe_task_name(ProbeTask task) {
    switch (task) {
        case ProbeTask::yaw_abs: return "yaw_abs";
        case ProbeTask::pitch_band: return "pitch_band";
        case ProbeTask::media: return "media";
    }
    return "?";
}

const char* probe_model_name(ProbeModel model) {
    return model == ProbeModel::least_squares ? "least_squares" : "lda";
}

TargetVector make_target(const Dataset& ds, ProbeTask task, double pitch_band_min,
                         double pitch_band_max) {
    TargetVector tv;
    tv.targets.resize(ds.size(), 0.0);
    tv.usable.resize(ds.size(), 0);
    tv.classification = task != ProbeTask::yaw_abs;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const MetadataRecord& r = ds.metadata[i];
        switch (task) {
            case ProbeTask::yaw_abs:
                if (r.yaw_deg) {
                    tv.targets[i] = std::fabs(*r.yaw_deg);
                    tv.usable[i] = 1;
                }
                break;
            case ProbeTask::pitch_band:
                if (r.pitch_deg) {
                    const bool centered =
                        *r.pitch_deg >= pitch_band_min && *r.pitch_deg <= pitch_band_max;
                    tv.targets[i] = centered ? 0.0 : 1.0;
                    tv.usable[i] = 1;
                }
                break;
            case ProbeTask::media:
                if (r.media_type) {
                    tv.targets[i] = *r.media_type == MediaType::still ? 1.0 : 0.0;
                    tv.usable[i] = 1;
                }
                break;
        }
        if (tv.usable[i]) ++tv.usable_count;
    }
    return tv;
}

LinearModel fit_least_squares(const FeatureMatrix& features,
                              const std::vector<double>& targets,
                              const std::vector<std::size_t>& rows, double ridge_lambda,
                              bool classification) {
    if (rows.size() < 2) {
        throw std::invalid_argument("fit_least_squares: need at least 2 training rows");
    }
    if (ridge_lambda < 0.0) {
        throw std::invalid_argument("fit_least_squares: ridge_lambda must be >= 0");
    }
    const auto d = static_cast<Eigen::Index>(features.cols);
    Eigen::MatrixXd x = gather_rows(features, rows);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        y(static_cast<Eigen::Index>(i)) = targets[rows[i]];
    }

    // Center so the intercept is not penalized.
    const Eigen::RowVectorXd xbar = x.colwise().mean();
    const double ybar = y.mean();
    x.rowwise() -= xbar;
    y.array() -= ybar;

    Eigen::VectorXd w;
    if (ridge_lambda > 0.0) {
        Eigen::MatrixXd gram = x.transpose() * x;
        gram.diagonal().array() += ridge_lambda;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success) {
            throw std::runtime_error("fit_least_squares: normal-equation solve failed");
        }
        w = ldlt.solve(x.transpose() * y);
    } else {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
        if (qr.rank() < d) {
            throw std::runtime_error(
                "fit_least_squares: rank-deficient design matrix; set ridge_lambda > 0");
        }
        w = qr.solve(y);
    }

    LinearModel model;
    model.weights.assign(w.data(), w.data() + d);
    model.bias = ybar - w.dot(xbar.transpose());
    model.classification = classification;
    return model;
}

LinearModel fit_lda_binary(const FeatureMatrix& features,
                           const std::vector<double>& targets,
                           const std::vector<std::size_t>& rows, double shrinkage) {
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) {
        throw std::invalid_argument("fit_lda_binary: shrinkage must lie in [0,1]");
    }
    std::vector<std::vector<std::size_t>> classes(2);
    for (std::size_t r : rows) {
        const double t = targets[r];
        if (t != 0.0 && t != 1.0) {
            throw std::invalid_argument("fit_lda_binary: targets must be 0 or 1");
        }
        classes[t == 1.0 ? 1 : 0].push_back(r);
    }
    if (classes[0].size() < 2 || classes[1].size() < 2) {
        throw std::invalid_argument("fit_lda_binary: both classes need at least 2 rows");
    }

    std::vector<Eigen::VectorXd> means(2);
    for (int k = 0; k < 2; ++k) {
        means[k] = gather_rows(features, classes[k]).colwise().mean();
    }
    const Eigen::MatrixXd sigma =
        shrunk_pooled_covariance(features, classes, means, shrinkage);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
    if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error("fit_lda_binary: covariance factorization failed");
    }
    Eigen::VectorXd w = ldlt.solve(means[1] - means[0]);
    // Scale so the class means score 0 and 1 exactly; the decision point 0.5
    // then sits midway between them and outputs read as continuous labels.
    const double span = w.dot(means[1] - means[0]);
    if (!(span > 0.0) || !std::isfinite(span)) {
        throw std::runtime_error("fit_lda_binary: non-finite covariance solution");
    }
    w /= span;

    LinearModel model;
    model.weights.assign(w.data(), w.data() + w.size());
    model.bias = 0.5 - 0.5 * w.dot(means[0] + means[1]);
    model.classification = true;
    return model;
}

double predict(const LinearModel& model, const float* x, std::size_t dims) {
    double acc = model.bias;
    for (std::size_t j = 0; j < dims; ++j) {
        acc += model.weights[j] * static_cast<double>(x[j]);
    }
    return acc;
}

ProbeReport run_probe(const Dataset& ds, const ProbeConfig& config) {
    if (config.iterations == 0) {
        throw std::invalid_argument("run_probe: iterations must be positive");
    }
    if (config.model == ProbeModel::lda && config.task == ProbeTask::yaw_abs &&
        !config.yaw_binned_lda) {
        throw std::invalid_argument(
            "run_probe: lda on the yaw task requires yaw_binned_lda");
    }

    const TargetVector tv =
        make_target(ds, config.task, config.pitch_band_min, config.pitch_band_max);
    std::vector<std::size_t> usable_rows;
    usable_rows.reserve(tv.usable_count);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (tv.usable[i]) usable_rows.push_back(i);
    }
    const std::size_t n_usable = usable_rows.size();
    if (n_usable < 4) {
        throw std::runtime_error("run_probe: fewer than 4 usable items for target " +
                                 std::string(probe_task_name(config.task)));
    }

    std::size_t train = config.train_count;
    if (n_usable < config.train_count + 2) {
        train = static_cast<std::size_t>(
            std::llround(config.train_fraction * static_cast<double>(n_usable)));
        train = std::clamp<std::size_t>(train, 1, n_usable - 1);
    }

    const bool binned_yaw = config.task == ProbeTask::yaw_abs && config.yaw_binned_lda;

    ProbeReport report;
    report.task = config.task;
    report.model = binned_yaw ? ProbeModel::lda : config.model;
    report.classification = tv.classification;
    report.usable_items = n_usable;
    report.train_size = train;
    report.test_size = n_usable - train;
    report.iterations = config.iterations;
    report.seed = config.seed;
    report.per_iteration.resize(config.iterations);

    std::exception_ptr first_error = nullptr;
#ifdef _OPENMP
    const int n_threads = config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(n_threads)
#endif
    for (std::size_t it = 0; it < config.iterations; ++it) {
        try {
            const SplitPlan plan = split(n_usable, train, config.seed, it);
            std::vector<std::size_t> train_rows(plan.train_idx.size());
            for (std::size_t i = 0; i < plan.train_idx.size(); ++i) {
                train_rows[i] = usable_rows[plan.train_idx[i]];
            }

            double metric = 0.0;
            if (binned_yaw) {
                const BinnedYawModel model =
                    fit_binned_yaw(ds.features, tv.targets, train_rows,
                                   config.yaw_bin_width, config.lda_shrinkage);
                double err = 0.0;
                for (std::size_t t : plan.test_idx) {
                    const std::size_t row = usable_rows[t];
                    const double pred =
                        predict_binned_yaw(model, ds.features.row(row), ds.dims());
                    err += std::fabs(pred - tv.targets[row]);
                }
                metric = err / static_cast<double>(plan.test_idx.size());
            } else {
                LinearModel model;
                if (config.model == ProbeModel::lda) {
                    model = fit_lda_binary(ds.features, tv.targets, train_rows,
                                           config.lda_shrinkage);
                } else {
                    model = fit_least_squares(ds.features, tv.targets, train_rows,
                                              config.ridge_lambda, tv.classification);
                }
                double acc = 0.0;
                for (std::size_t t : plan.test_idx) {
                    const std::size_t row = usable_rows[t];
                    const double pred = predict(model, ds.features.row(row), ds.dims());
                    if (tv.classification) {
                        // Continuous score rounded to the nearest label.
                        const double label = pred >= model.threshold ? 1.0 : 0.0;
                        acc += label == tv.targets[row] ? 1.0 : 0.0;
                    } else {
                        acc += std::fabs(pred - tv.targets[row]);
                    }
                }
                metric = acc / static_cast<double>(plan.test_idx.size());
                if (tv.classification) metric *= 100.0;  // percent correct
            }
            report.per_iteration[it] = {it, metric};
        } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical
#endif
            {
                if (!first_error) {
                    first_error = std::make_exception_ptr(std::runtime_error(
                        "run_probe: iteration " + std::to_string(it) + ": " + e.what()));
                }
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    double sum = 0.0;
    for (const auto& pi : report.per_iteration) sum += pi.metric;
    report.metric_mean = sum / static_cast<double>(config.iterations);
    double ss = 0.0;
    for (const auto& pi : report.per_iteration) {
        const double d = pi.metric - report.metric_mean;
        ss += d * d;
    }
    report.metric_sd = config.iterations > 1
                           ? std::sqrt(ss / static_cast<double>(config.iterations - 1))
                           : 0.0;
    return report;
}

}  // namespace embaudit
