// embaudit: command-line front end over the embedding-audit library.
//
// Each subcommand reads a feature matrix (CSV or EMAT) plus image metadata,
// runs one analysis, and writes machine-readable reports (JSON, CSV) and
// derived SVG plots into an output directory. Every run ends by writing
// manifest.json (content hash of every artifact) and run.log (timestamps and
// argv -- the only file with wall-clock content, so identical runs produce
// byte-identical artifacts everywhere else).
//
// Exit codes: 0 success, 2 usage error (bad flag, missing required option),
// 1 data or analysis error (unreadable file, module precondition violated).

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "embaudit/dataset.hpp"
#include "embaudit/invariance.hpp"
#include "embaudit/manifest.hpp"
#include "embaudit/probes.hpp"
#include "embaudit/quality.hpp"
#include "embaudit/rng.hpp"
#include "embaudit/svg.hpp"
#include "embaudit/synth.hpp"
#include "embaudit/tsne.hpp"
#include "embaudit/verification.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace embaudit;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string iso_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string default_out() {
    const char* env = std::getenv("EMBAUDIT_OUT");
    return (env && *env) ? env : "embaudit_out";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_report(const fs::path& path, const ordered_json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

Dataset load_joined(const std::string& features, const std::string& meta) {
    FeatureMatrix fm = load_features(features, feature_format_from_path(features));
    return join(fm, load_metadata(meta));
}

ordered_json dataset_json(const Dataset& ds) {
    ordered_json j;
    j["items"] = ds.size();
    j["dims"] = ds.dims();
    j["dropped"] = ds.dropped.size();
    return j;
}

// ---- flag-string -> enum mappings (values pre-validated by CLI11) ----

ProbeTask parse_task(const std::string& s) {
    if (s == "yaw") return ProbeTask::yaw_abs;
    if (s == "pitch") return ProbeTask::pitch_band;
    return ProbeTask::media;
}

ProbeModel parse_model(const std::string& s) {
    return s == "lda" ? ProbeModel::lda : ProbeModel::least_squares;
}

ConditionSpec::Kind parse_condition(const std::string& s) {
    return s == "still_vs_video" ? ConditionSpec::Kind::still_vs_video
                                 : ConditionSpec::Kind::frontal_vs_profile;
}

TemplateGrouping parse_grouping(const std::string& s) {
    if (s == "subject") return TemplateGrouping::by_subject;
    if (s == "random_split") return TemplateGrouping::random_split;
    return TemplateGrouping::by_template_id;
}

CenterKind parse_center(const std::string& s) {
    return s == "centroid" ? CenterKind::centroid : CenterKind::origin;
}

TsneAlgorithm parse_algorithm(const std::string& s) {
    return s == "barnes_hut" ? TsneAlgorithm::barnes_hut : TsneAlgorithm::exact;
}

FeatureFormat parse_format(const std::string& s) {
    return s == "emat" ? FeatureFormat::emat : FeatureFormat::csv;
}

YawShape parse_shape(const std::string& s) {
    return s == "linear" ? YawShape::linear : YawShape::sine;
}

// ---- probe ----

struct ProbeOpts {
    std::string features;
    std::string meta;
    std::string out = default_out();
    std::string target = "yaw";
    std::string model = "least_squares";
    ProbeConfig cfg;
};

ordered_json probe_config_echo(const ProbeOpts& o) {
    ordered_json c;
    c["features"] = o.features;
    c["metadata"] = o.meta;
    c["output_dir"] = o.out;
    c["target"] = o.target;
    c["model"] = o.model;
    c["iterations"] = o.cfg.iterations;
    c["train_count"] = o.cfg.train_count;
    c["train_fraction"] = o.cfg.train_fraction;
    c["ridge_lambda"] = o.cfg.ridge_lambda;
    c["lda_shrinkage"] = o.cfg.lda_shrinkage;
    c["yaw_binned_lda"] = o.cfg.yaw_binned_lda;
    c["yaw_bin_width"] = o.cfg.yaw_bin_width;
    c["pitch_band_min"] = o.cfg.pitch_band_min;
    c["pitch_band_max"] = o.cfg.pitch_band_max;
    c["seed"] = o.cfg.seed;
    return c;
}

ordered_json probe_report_json(const Dataset& ds, const ProbeConfig& cfg,
                               ordered_json config_echo) {
    const ProbeReport rep = run_probe(ds, cfg);
    ordered_json j;
    j["tool_version"] = kToolVersion;
    j["report"] = "probe";
    j["config"] = std::move(config_echo);
    j["dataset"] = dataset_json(ds);
    j["task"] = probe_task_name(rep.task);
    j["model"] = probe_model_name(rep.model);
    j["classification"] = rep.classification;
    j["metric"] = rep.classification ? "percent_correct" : "mean_abs_error_deg";
    j["usable_items"] = rep.usable_items;
    j["train_size"] = rep.train_size;
    j["test_size"] = rep.test_size;
    ordered_json iters = ordered_json::array();
    for (const auto& it : rep.per_iteration) {
        ordered_json e;
        e["iteration"] = it.iteration;
        e["metric"] = it.metric;
        iters.push_back(std::move(e));
    }
    j["per_iteration"] = std::move(iters);
    j["metric_mean"] = rep.metric_mean;
    j["metric_sd"] = rep.metric_sd;
    return j;
}

// ---- invariance ----

struct InvarianceOpts {
    std::string features;
    std::string meta;
    std::string out = default_out();
    std::string condition = "frontal_vs_profile";
    double frontal_max_absyaw = 20.0;
    double profile_min_absyaw = 60.0;
    std::size_t min_per_group = 20;
    double alpha = 0.05;
    std::size_t top_k = 7;
    int threads = 0;
};

ConditionSpec make_condition_spec(const std::string& kind, double frontal_max,
                                  double profile_min) {
    ConditionSpec c;
    c.kind = parse_condition(kind);
    c.frontal_max_absyaw = frontal_max;
    c.profile_min_absyaw = profile_min;
    return c;
}

ordered_json invariance_config_echo(const InvarianceOpts& o) {
    ordered_json c;
    c["features"] = o.features;
    c["metadata"] = o.meta;
    c["output_dir"] = o.out;
    c["condition"] = o.condition;
    c["frontal_max_absyaw"] = o.frontal_max_absyaw;
    c["profile_min_absyaw"] = o.profile_min_absyaw;
    c["min_per_group"] = o.min_per_group;
    c["alpha"] = o.alpha;
    c["top_k"] = o.top_k;
    return c;
}

// Runs the map, writes pvalues.csv + heatmap.svg next to the report, and
// returns the report body. The computed map is handed back for reuse (the
// verify arm ranks identities off the same map inside `audit`).
ordered_json invariance_report_json(const Dataset& ds, const InvarianceOpts& o,
                                    const fs::path& outdir, InvarianceMap* map_out) {
    const ConditionSpec cond =
        make_condition_spec(o.condition, o.frontal_max_absyaw, o.profile_min_absyaw);
    InvarianceMap map =
        compute_invariance_map(ds, cond, o.min_per_group, o.alpha, o.threads);
    const InvarianceIndex idx = invariance_index(map);
    const std::vector<std::string> top = rank_invariant_identities(idx, o.top_k);

    write_pvalue_csv(map, outdir / "pvalues.csv");
    emit_heatmap(map, outdir / "heatmap.svg");

    ordered_json j;
    j["tool_version"] = kToolVersion;
    j["report"] = "invariance";
    j["config"] = invariance_config_echo(o);
    j["dataset"] = dataset_json(ds);
    j["feature_count"] = map.feature_count;
    j["alpha_corrected"] = map.alpha_corrected;
    ordered_json ids = ordered_json::array();
    for (std::size_t i = 0; i < idx.identities.size(); ++i) {
        ordered_json e;
        e["subject_id"] = idx.identities[i];
        e["fraction_significant"] = idx.fraction_significant[i];
        e["fraction_undifferentiated"] = idx.fraction_undifferentiated[i];
        e["n_group_a"] = idx.n_group_a[i];
        e["n_group_b"] = idx.n_group_b[i];
        ids.push_back(std::move(e));
    }
    j["identities"] = std::move(ids);
    j["most_invariant"] = top;
    ordered_json art;
    art["p_values_csv"] = "pvalues.csv";
    art["heatmap_svg"] = "heatmap.svg";
    j["artifacts"] = std::move(art);
    if (map_out) *map_out = std::move(map);
    return j;
}

// ---- verify ----

struct VerifyOpts {
    std::string features;
    std::string meta;
    std::string out = default_out();
    std::string grouping = "by_template_id";
    std::size_t split_size = 8;
    std::size_t top_k = 7;
    std::size_t impostor_cap = 100000;
    std::uint64_t seed = 0;
    std::string condition = "frontal_vs_profile";
    double frontal_max_absyaw = 20.0;
    double profile_min_absyaw = 60.0;
    std::size_t min_per_group = 20;
    double alpha = 0.05;
    int threads = 0;
};

ordered_json verify_config_echo(const VerifyOpts& o) {
    ordered_json c;
    c["features"] = o.features;
    c["metadata"] = o.meta;
    c["output_dir"] = o.out;
    c["grouping"] = o.grouping;
    c["split_size"] = o.split_size;
    c["top_k"] = o.top_k;
    c["impostor_cap"] = o.impostor_cap;
    c["seed"] = o.seed;
    c["condition"] = o.condition;
    c["frontal_max_absyaw"] = o.frontal_max_absyaw;
    c["profile_min_absyaw"] = o.profile_min_absyaw;
    c["min_per_group"] = o.min_per_group;
    c["alpha"] = o.alpha;
    return c;
}

void write_roc_csv(const RocCurve& curve, const fs::path& path) {
    std::string body = "far,tar,threshold\n";
    for (const auto& p : curve.points) {
        body += fmt9(p.far);
        body += ',';
        body += fmt9(p.tar);
        body += ',';
        body += fmt9(p.threshold);
        body += '\n';
    }
    write_text(path, body);
}

// Both curves on one square plot: TAR (y) against FAR (x), chance diagonal
// in grey, invariant arm in blue, rest arm in red.
void write_roc_svg(const RocCurve& invariant, const RocCurve& rest,
                   const fs::path& path) {
    const double size = 640.0;
    const double margin = 60.0;
    const double span = size - 2.0 * margin;
    SvgWriter svg(size, size);
    auto sx = [&](double far) { return margin + far * span; };
    auto sy = [&](double tar) { return size - margin - tar * span; };
    svg.rect(margin, margin, span, span, "#ffffff", "#000000", 1.0);
    svg.line(sx(0.0), sy(0.0), sx(1.0), sy(1.0), "#bbbbbb", 1.0);
    for (int i = 0; i <= 4; ++i) {
        const double v = static_cast<double>(i) / 4.0;
        svg.line(sx(v), sy(0.0), sx(v), sy(0.0) + 5.0, "#000000", 1.0);
        svg.text(sx(v), sy(0.0) + 18.0, fmt9(v), 10.0, "middle");
        svg.line(sx(0.0) - 5.0, sy(v), sx(0.0), sy(v), "#000000", 1.0);
        svg.text(sx(0.0) - 8.0, sy(v) + 4.0, fmt9(v), 10.0, "end");
    }
    auto polyline = [&](const RocCurve& c, const std::string& color) {
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            svg.line(sx(c.points[i - 1].far), sy(c.points[i - 1].tar),
                     sx(c.points[i].far), sy(c.points[i].tar), color, 2.0);
        }
    };
    polyline(rest, "#d62728");
    polyline(invariant, "#1f77b4");
    svg.text(margin, margin - 16.0, "verification ROC", 13.0);
    svg.text(margin, margin - 2.0,
             "blue = most invariant identities, red = rest, grey = chance", 10.0);
    svg.text(size / 2.0, size - 18.0, "false accept rate", 11.0, "middle");
    svg.text(18.0, margin - 2.0, "true accept rate", 11.0);
    svg.save(path);
}

ordered_json arm_json(const VerificationArm& arm, const std::string& roc_csv) {
    ordered_json j;
    j["auc"] = arm.curve.auc;
    j["genuine_pairs"] = arm.curve.genuine_count;
    j["impostor_pairs"] = arm.curve.impostor_count;
    j["impostors_before_cap"] = arm.impostors_before_cap;
    j["template_count"] = arm.template_count;
    j["roc_csv"] = roc_csv;
    return j;
}

ordered_json verify_report_json(const Dataset& ds, const InvarianceMap& map,
                                const VerifyOpts& o, const fs::path& outdir) {
    VerificationConfig vcfg;
    vcfg.templates.grouping = parse_grouping(o.grouping);
    vcfg.templates.random_split_size = o.split_size;
    vcfg.templates.seed = o.seed;
    vcfg.top_k = o.top_k;
    vcfg.impostor_cap = o.impostor_cap;
    vcfg.seed = o.seed;
    vcfg.threads = o.threads;
    const VerificationReport rep = compare_invariant_vs_rest(ds, map, vcfg);

    write_roc_csv(rep.invariant.curve, outdir / "roc_invariant.csv");
    write_roc_csv(rep.rest.curve, outdir / "roc_rest.csv");
    write_roc_svg(rep.invariant.curve, rep.rest.curve, outdir / "roc.svg");

    ordered_json j;
    j["tool_version"] = kToolVersion;
    j["report"] = "verify";
    j["config"] = verify_config_echo(o);
    j["dataset"] = dataset_json(ds);
    j["comparator"] = "cosine_mean_pooled";
    j["invariant_identities"] = rep.invariant_identities;
    j["invariant"] = arm_json(rep.invariant, "roc_invariant.csv");
    j["rest"] = arm_json(rep.rest, "roc_rest.csv");
    j["auc_gap"] = rep.auc_gap;
    ordered_json art;
    art["roc_invariant_csv"] = "roc_invariant.csv";
    art["roc_rest_csv"] = "roc_rest.csv";
    art["roc_svg"] = "roc.svg";
    j["artifacts"] = std::move(art);
    return j;
}

// ---- quality ----

struct QualityOpts {
    std::string features;
    std::string out = default_out();
    std::string center = "origin";
    std::size_t head_count = 10;
    double head_fraction = 0.0;  // 0 = disabled; head_count applies
    std::vector<double> band_percentiles = {20.0, 50.0, 90.0};
    std::size_t band_count = 10;
};

ordered_json quality_config_echo(const QualityOpts& o) {
    ordered_json c;
    c["features"] = o.features;
    c["output_dir"] = o.out;
    c["center"] = o.center;
    c["head_count"] = o.head_count;
    c["head_fraction"] = o.head_fraction;
    c["band_percentiles"] = o.band_percentiles;
    c["band_count"] = o.band_count;
    return c;
}

ordered_json quality_report_json(const FeatureMatrix& fm, const QualityOpts& o,
                                 const fs::path& outdir) {
    const QualityRanking ranking = rank_by_center_distance(fm, parse_center(o.center));
    const std::size_t n = ranking.entries.size();

    std::string csv = "rank,item_id,distance\n";
    for (std::size_t i = 0; i < n; ++i) {
        csv += std::to_string(i);
        csv += ',';
        csv += ranking.entries[i].item_id;
        csv += ',';
        csv += fmt9(ranking.entries[i].distance);
        csv += '\n';
    }
    write_text(outdir / "ranking.csv", csv);

    const std::vector<QualityEntry> low_head =
        o.head_fraction > 0.0 ? head_fraction(ranking, o.head_fraction)
                              : head(ranking, std::min(o.head_count, n));

    ordered_json j;
    j["tool_version"] = kToolVersion;
    j["report"] = "quality";
    j["config"] = quality_config_echo(o);
    j["items"] = n;
    j["dims"] = fm.cols;
    ordered_json head_j;
    head_j["count"] = low_head.size();
    ordered_json head_ids = ordered_json::array();
    for (const auto& e : low_head) head_ids.push_back(e.item_id);
    head_j["item_ids"] = std::move(head_ids);
    head_j["max_distance"] = low_head.empty() ? 0.0 : low_head.back().distance;
    j["head"] = std::move(head_j);
    ordered_json bands = ordered_json::array();
    for (const double p : o.band_percentiles) {
        const auto band = percentile_band(ranking, p, std::min(o.band_count, n));
        double sum = 0.0;
        ordered_json ids = ordered_json::array();
        for (const auto& e : band) {
            sum += e.distance;
            ids.push_back(e.item_id);
        }
        ordered_json b;
        b["percentile"] = p;
        b["count"] = band.size();
        b["mean_distance"] = band.empty() ? 0.0 : sum / static_cast<double>(band.size());
        b["item_ids"] = std::move(ids);
        bands.push_back(std::move(b));
    }
    j["bands"] = std::move(bands);
    ordered_json art;
    art["ranking_csv"] = "ranking.csv";
    j["artifacts"] = std::move(art);
    return j;
}

// ---- tsne ----

struct TsneOpts {
    std::string features;
    std::string meta;  // optional; enables metadata-driven point colors
    std::string out = default_out();
    std::string algorithm = "exact";
    std::string color_by = "subject";  // subject | media | yaw_band | none
    std::size_t max_items = 0;         // 0 = embed everything
    TsneConfig cfg;
};

ordered_json tsne_config_echo(const TsneOpts& o) {
    ordered_json c;
    c["features"] = o.features;
    c["metadata"] = o.meta;
    c["output_dir"] = o.out;
    c["perplexity"] = o.cfg.perplexity;
    c["iterations"] = o.cfg.iterations;
    c["learning_rate"] = o.cfg.learning_rate;
    c["early_exaggeration"] = o.cfg.early_exaggeration;
    c["exaggeration_iters"] = o.cfg.exaggeration_iters;
    c["algorithm"] = o.algorithm;
    c["theta"] = o.cfg.theta;
    c["normalize_input"] = o.cfg.normalize_input;
    c["kl_log_every"] = o.cfg.kl_log_every;
    c["seed"] = o.cfg.seed;
    c["color_by"] = o.color_by;
    c["max_items"] = o.max_items;
    return c;
}

// Keeps a seeded subsample of the rows (sorted, so original order survives).
void subsample_rows(FeatureMatrix& fm, std::vector<MetadataRecord>& meta,
                    std::size_t keep_count, std::uint64_t seed) {
    Rng rng(stream_seed(seed, 0x73756273616d70ULL));  // stream disjoint from the optimizer
    const auto keep = sample_without_replacement(fm.rows, keep_count, rng);
    FeatureMatrix out;
    out.rows = keep.size();
    out.cols = fm.cols;
    out.values.reserve(out.rows * out.cols);
    std::vector<MetadataRecord> kept_meta;
    for (const std::size_t r : keep) {
        out.item_ids.push_back(fm.item_ids[r]);
        out.values.insert(out.values.end(), fm.row(r), fm.row(r) + fm.cols);
        if (!meta.empty()) kept_meta.push_back(meta[r]);
    }
    fm = std::move(out);
    meta = std::move(kept_meta);
}

std::vector<int> color_labels(const std::vector<MetadataRecord>& meta,
                              const std::string& by, std::size_t n) {
    std::vector<int> colors(n, 0);
    if (meta.size() != n || by == "none") return colors;
    if (by == "subject") {
        std::map<std::string, int> index;
        for (const auto& r : meta) {
            if (!r.subject_id.empty()) index.emplace(r.subject_id, 0);
        }
        int next = 0;
        for (auto& [label, idx] : index) idx = next++;
        for (std::size_t i = 0; i < n; ++i) {
            colors[i] = meta[i].subject_id.empty() ? 0 : index[meta[i].subject_id];
        }
    } else if (by == "media") {
        for (std::size_t i = 0; i < n; ++i) {
            if (!meta[i].media_type) {
                colors[i] = 2;
            } else {
                colors[i] = *meta[i].media_type == MediaType::still ? 0 : 1;
            }
        }
    } else {  // yaw_band: frontal / profile / in-between / missing
        for (std::size_t i = 0; i < n; ++i) {
            if (!meta[i].yaw_deg) {
                colors[i] = 3;
            } else {
                const double a = std::abs(*meta[i].yaw_deg);
                colors[i] = a <= 20.0 ? 0 : (a >= 60.0 ? 1 : 2);
            }
        }
    }
    return colors;
}

ordered_json tsne_report_json(const TsneOpts& o, const fs::path& outdir) {
    FeatureMatrix fm = load_features(o.features, feature_format_from_path(o.features));
    std::vector<MetadataRecord> meta;
    std::size_t dropped = 0;
    if (!o.meta.empty()) {
        Dataset ds = join(fm, load_metadata(o.meta));
        dropped = ds.dropped.size();
        fm = std::move(ds.features);
        meta = std::move(ds.metadata);
    }
    if (o.max_items > 0 && o.max_items < fm.rows) {
        subsample_rows(fm, meta, o.max_items, o.cfg.seed);
    }

    TsneConfig cfg = o.cfg;
    cfg.algorithm = parse_algorithm(o.algorithm);
    const Embedding2D emb = tsne(fm, cfg);

    std::string csv = "item_id,x,y\n";
    for (std::size_t i = 0; i < emb.n; ++i) {
        csv += fm.item_ids[i];
        csv += ',';
        csv += fmt9(emb.point(i)[0]);
        csv += ',';
        csv += fmt9(emb.point(i)[1]);
        csv += '\n';
    }
    write_text(outdir / "embedding.csv", csv);
    scatter_svg(emb.y, emb.n,
                color_labels(meta, o.meta.empty() ? "none" : o.color_by, emb.n),
                outdir / "scatter.svg");

    ordered_json j;
    j["tool_version"] = kToolVersion;
    j["report"] = "tsne";
    j["config"] = tsne_config_echo(o);
    j["items"] = emb.n;
    j["dims"] = fm.cols;
    j["dropped"] = dropped;
    ordered_json trace = ordered_json::array();
    for (const auto& [iter, kl] : emb.kl_trace) {
        ordered_json e;
        e["iteration"] = iter;
        e["kl"] = kl;
        trace.push_back(std::move(e));
    }
    j["kl_trace"] = std::move(trace);
    j["final_kl"] = emb.final_kl;
    ordered_json art;
    art["embedding_csv"] = "embedding.csv";
    art["scatter_svg"] = "scatter.svg";
    j["artifacts"] = std::move(art);
    return j;
}

// ---- synth ----

struct SynthOpts {
    std::string out = default_out();
    std::string spec_path;  // JSON overlay; explicit flags win over its values
    std::string format = "csv";
    std::string yaw_shape = "sine";
    SynthSpec spec;
};

SynthSpec synth_spec_from_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("synth: cannot open spec file " + path.string());
    const ordered_json j = ordered_json::parse(in);
    static const std::set<std::string> known = {
        "n_identities",  "items_per_identity", "dims",
        "centroid_scale", "feature_noise",     "yaw_scale",
        "yaw_noise_deg",  "yaw_shape",         "media_shift",
        "invariant_fraction", "invariant_snr_boost", "quality_lo",
        "quality_hi",     "still_prob",        "template_size",
        "yaw_min",        "yaw_max",           "pitch_sd",
        "roll_sd",        "seed",
    };
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key)) {
            throw std::runtime_error("synth: unknown spec key: " + key);
        }
    }
    SynthSpec s;
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n_identities", s.n_identities);
    get("items_per_identity", s.items_per_identity);
    get("dims", s.dims);
    get("centroid_scale", s.centroid_scale);
    get("feature_noise", s.feature_noise);
    get("yaw_scale", s.yaw_scale);
    get("yaw_noise_deg", s.yaw_noise_deg);
    get("media_shift", s.media_shift);
    get("invariant_fraction", s.invariant_fraction);
    get("invariant_snr_boost", s.invariant_snr_boost);
    get("quality_lo", s.quality_lo);
    get("quality_hi", s.quality_hi);
    get("still_prob", s.still_prob);
    get("template_size", s.template_size);
    get("yaw_min", s.yaw_min);
    get("yaw_max", s.yaw_max);
    get("pitch_sd", s.pitch_sd);
    get("roll_sd", s.roll_sd);
    get("seed", s.seed);
    if (j.contains("yaw_shape")) {
        const std::string shape = j.at("yaw_shape").get<std::string>();
        if (shape != "sine" && shape != "linear") {
            throw std::runtime_error("synth: yaw_shape must be sine or linear, got " + shape);
        }
        s.yaw_shape = parse_shape(shape);
    }
    return s;
}

ordered_json synth_config_echo(const SynthOpts& o, const SynthSpec& s) {
    ordered_json c;
    c["output_dir"] = o.out;
    c["spec"] = o.spec_path;
    c["format"] = o.format;
    c["n_identities"] = s.n_identities;
    c["items_per_identity"] = s.items_per_identity;
    c["dims"] = s.dims;
    c["centroid_scale"] = s.centroid_scale;
    c["feature_noise"] = s.feature_noise;
    c["yaw_scale"] = s.yaw_scale;
    c["yaw_noise_deg"] = s.yaw_noise_deg;
    c["yaw_shape"] = yaw_shape_name(s.yaw_shape);
    c["media_shift"] = s.media_shift;
    c["invariant_fraction"] = s.invariant_fraction;
    c["invariant_snr_boost"] = s.invariant_snr_boost;
    c["quality_lo"] = s.quality_lo;
    c["quality_hi"] = s.quality_hi;
    c["still_prob"] = s.still_prob;
    c["template_size"] = s.template_size;
    c["yaw_min"] = s.yaw_min;
    c["yaw_max"] = s.yaw_max;
    c["pitch_sd"] = s.pitch_sd;
    c["roll_sd"] = s.roll_sd;
    c["seed"] = s.seed;
    return c;
}

ordered_json synth_report_json(const SynthOpts& o, const SynthSpec& spec,
                               const fs::path& outdir) {
    const SynthResult result = generate(spec);
    const FeatureFormat format = parse_format(o.format);
    const std::string features_name =
        format == FeatureFormat::emat ? "features.emat" : "features.csv";
    save_features(result.dataset.features, outdir / features_name, format);
    save_metadata(result.dataset.metadata, outdir / "metadata.csv");

    ordered_json j;
    j["tool_version"] = kToolVersion;
    j["report"] = "synth";
    j["config"] = synth_config_echo(o, spec);
    j["items"] = result.dataset.size();
    j["dims"] = result.dataset.dims();
    j["subjects"] = result.truth.subject_ids;
    std::vector<std::string> invariant(result.truth.invariant_subjects.begin(),
                                       result.truth.invariant_subjects.end());
    std::sort(invariant.begin(), invariant.end());
    j["invariant_subjects"] = invariant;
    j["identity_of_item"] = result.truth.identity_of_item;
    j["yaw_deg"] = result.truth.yaw;
    j["quality"] = result.truth.quality;
    ordered_json art;
    art["features"] = features_name;
    art["metadata"] = "metadata.csv";
    j["artifacts"] = std::move(art);
    return j;
}

// ---- convert ----

struct ConvertOpts {
    std::string features;
    std::string out = default_out();
    std::string format = "emat";
};

ordered_json convert_report_json(const ConvertOpts& o, const fs::path& outdir) {
    const FeatureMatrix fm =
        load_features(o.features, feature_format_from_path(o.features));
    const FeatureFormat format = parse_format(o.format);
    const std::string name =
        format == FeatureFormat::emat ? "features.emat" : "features.csv";
    save_features(fm, outdir / name, format);
    ordered_json j;
    j["tool_version"] = kToolVersion;
    j["report"] = "convert";
    ordered_json c;
    c["features"] = o.features;
    c["output_dir"] = o.out;
    c["format"] = o.format;
    j["config"] = std::move(c);
    j["items"] = fm.rows;
    j["dims"] = fm.cols;
    ordered_json art;
    art["features"] = name;
    j["artifacts"] = std::move(art);
    return j;
}

// ---- audit (full battery) ----

struct AuditOpts {
    std::string features;
    std::string meta;
    std::string out = default_out();
    std::uint64_t seed = 0;
    int threads = 0;
    // probes
    std::size_t probe_iterations = 20;
    std::size_t train_count = 18000;
    double train_fraction = 18000.0 / 24502.0;
    double ridge_lambda = 1e-3;
    double lda_shrinkage = 1e-3;
    // invariance
    std::string condition = "frontal_vs_profile";
    double frontal_max_absyaw = 20.0;
    double profile_min_absyaw = 60.0;
    std::size_t min_per_group = 20;
    double alpha = 0.05;
    std::size_t top_k = 7;
    // verification
    std::string grouping = "by_template_id";
    std::size_t split_size = 8;
    std::size_t impostor_cap = 100000;
    // quality
    std::string center = "origin";
    std::size_t head_count = 10;
    double head_fraction = 0.0;
    std::size_t band_count = 10;
    // tsne
    double perplexity = 30.0;
    std::size_t tsne_iterations = 1000;
    double learning_rate = 200.0;
    std::string algorithm = "barnes_hut";
    double theta = 0.5;
    bool normalize_input = false;
    std::size_t kl_log_every = 50;
    std::size_t max_items = 1000;
};

ordered_json audit_config_echo(const AuditOpts& o) {
    ordered_json c;
    c["features"] = o.features;
    c["metadata"] = o.meta;
    c["output_dir"] = o.out;
    c["seed"] = o.seed;
    c["probe_iterations"] = o.probe_iterations;
    c["train_count"] = o.train_count;
    c["train_fraction"] = o.train_fraction;
    c["ridge_lambda"] = o.ridge_lambda;
    c["lda_shrinkage"] = o.lda_shrinkage;
    c["condition"] = o.condition;
    c["frontal_max_absyaw"] = o.frontal_max_absyaw;
    c["profile_min_absyaw"] = o.profile_min_absyaw;
    c["min_per_group"] = o.min_per_group;
    c["alpha"] = o.alpha;
    c["top_k"] = o.top_k;
    c["grouping"] = o.grouping;
    c["split_size"] = o.split_size;
    c["impostor_cap"] = o.impostor_cap;
    c["center"] = o.center;
    c["head_count"] = o.head_count;
    c["head_fraction"] = o.head_fraction;
    c["band_count"] = o.band_count;
    c["perplexity"] = o.perplexity;
    c["tsne_iterations"] = o.tsne_iterations;
    c["learning_rate"] = o.learning_rate;
    c["algorithm"] = o.algorithm;
    c["theta"] = o.theta;
    c["normalize_input"] = o.normalize_input;
    c["kl_log_every"] = o.kl_log_every;
    c["max_items"] = o.max_items;
    return c;
}

void run_audit(const AuditOpts& o, const fs::path& outdir) {
    const Dataset ds = load_joined(o.features, o.meta);

    // Linear probes over all three attributes, least-squares model.
    ordered_json headline;
    const struct {
        const char* flag;
        const char* file;
    } probe_runs[] = {
        {"yaw", "probe_yaw_report.json"},
        {"pitch", "probe_pitch_report.json"},
        {"media", "probe_media_report.json"},
    };
    for (const auto& run : probe_runs) {
        ProbeOpts po;
        po.features = o.features;
        po.meta = o.meta;
        po.out = o.out;
        po.target = run.flag;
        po.cfg.task = parse_task(run.flag);
        po.cfg.iterations = o.probe_iterations;
        po.cfg.train_count = o.train_count;
        po.cfg.train_fraction = o.train_fraction;
        po.cfg.ridge_lambda = o.ridge_lambda;
        po.cfg.lda_shrinkage = o.lda_shrinkage;
        po.cfg.seed = o.seed;
        po.cfg.threads = o.threads;
        const ordered_json rep = probe_report_json(ds, po.cfg, probe_config_echo(po));
        write_report(outdir / run.file, rep);
        headline[std::string("probe_") + run.flag + "_mean"] = rep.at("metric_mean");
    }

    // Invariance map, then verification split by its ranking.
    InvarianceOpts io;
    io.features = o.features;
    io.meta = o.meta;
    io.out = o.out;
    io.condition = o.condition;
    io.frontal_max_absyaw = o.frontal_max_absyaw;
    io.profile_min_absyaw = o.profile_min_absyaw;
    io.min_per_group = o.min_per_group;
    io.alpha = o.alpha;
    io.top_k = o.top_k;
    io.threads = o.threads;
    InvarianceMap map;
    const ordered_json inv_rep = invariance_report_json(ds, io, outdir, &map);
    write_report(outdir / "invariance_report.json", inv_rep);
    headline["most_invariant"] = inv_rep.at("most_invariant");

    VerifyOpts vo;
    vo.features = o.features;
    vo.meta = o.meta;
    vo.out = o.out;
    vo.grouping = o.grouping;
    vo.split_size = o.split_size;
    vo.top_k = o.top_k;
    vo.impostor_cap = o.impostor_cap;
    vo.seed = o.seed;
    vo.condition = o.condition;
    vo.frontal_max_absyaw = o.frontal_max_absyaw;
    vo.profile_min_absyaw = o.profile_min_absyaw;
    vo.min_per_group = o.min_per_group;
    vo.alpha = o.alpha;
    vo.threads = o.threads;
    const ordered_json ver_rep = verify_report_json(ds, map, vo, outdir);
    write_report(outdir / "verify_report.json", ver_rep);
    headline["auc_invariant"] = ver_rep.at("invariant").at("auc");
    headline["auc_rest"] = ver_rep.at("rest").at("auc");
    headline["auc_gap"] = ver_rep.at("auc_gap");

    QualityOpts qo;
    qo.features = o.features;
    qo.out = o.out;
    qo.center = o.center;
    qo.head_count = o.head_count;
    qo.head_fraction = o.head_fraction;
    qo.band_count = o.band_count;
    const ordered_json q_rep = quality_report_json(ds.features, qo, outdir);
    write_report(outdir / "quality_report.json", q_rep);
    headline["quality_head_count"] = q_rep.at("head").at("count");

    TsneOpts to;
    to.features = o.features;
    to.meta = o.meta;
    to.out = o.out;
    to.algorithm = o.algorithm;
    to.max_items = o.max_items;
    to.cfg.perplexity = o.perplexity;
    to.cfg.iterations = o.tsne_iterations;
    to.cfg.learning_rate = o.learning_rate;
    to.cfg.theta = o.theta;
    to.cfg.normalize_input = o.normalize_input;
    to.cfg.kl_log_every = o.kl_log_every;
    to.cfg.seed = o.seed;
    to.cfg.threads = o.threads;
    const ordered_json t_rep = tsne_report_json(to, outdir);
    write_report(outdir / "tsne_report.json", t_rep);
    headline["tsne_final_kl"] = t_rep.at("final_kl");

    ordered_json j;
    j["tool_version"] = kToolVersion;
    j["report"] = "audit";
    j["config"] = audit_config_echo(o);
    j["dataset"] = dataset_json(ds);
    j["headline"] = std::move(headline);
    j["artifacts"] = ordered_json::array({
        "probe_yaw_report.json", "probe_pitch_report.json", "probe_media_report.json",
        "invariance_report.json", "pvalues.csv", "heatmap.svg",
        "verify_report.json", "roc_invariant.csv", "roc_rest.csv", "roc.svg",
        "quality_report.json", "ranking.csv",
        "tsne_report.json", "embedding.csv", "scatter.svg",
    });
    write_report(outdir / "audit_report.json", j);
}

// ---- option registration ----

void add_common_probe_flags(CLI::App* cmd, ProbeOpts& o) {
    cmd->add_option("--features", o.features, "feature matrix (.csv or .emat)")
        ->required();
    cmd->add_option("--meta", o.meta, "metadata CSV")->required();
    cmd->add_option("--out", o.out, "output directory")->capture_default_str();
    cmd->add_option("--target", o.target, "attribute to probe")
        ->check(CLI::IsMember({"yaw", "pitch", "media"}))
        ->capture_default_str();
    cmd->add_option("--model", o.model, "probe model")
        ->check(CLI::IsMember({"least_squares", "lda"}))
        ->capture_default_str();
    cmd->add_option("--iterations", o.cfg.iterations, "bootstrap iterations")
        ->capture_default_str();
    cmd->add_option("--train-count", o.cfg.train_count, "absolute train-set size")
        ->capture_default_str();
    cmd->add_option("--train-fraction", o.cfg.train_fraction,
                    "train fraction when train-count does not fit")
        ->capture_default_str();
    cmd->add_option("--ridge-lambda", o.cfg.ridge_lambda, "ridge penalty")
        ->capture_default_str();
    cmd->add_option("--lda-shrinkage", o.cfg.lda_shrinkage, "LDA covariance shrinkage")
        ->capture_default_str();
    cmd->add_flag("--yaw-binned-lda", o.cfg.yaw_binned_lda,
                  "probe yaw with multiclass LDA over fixed-width bins");
    cmd->add_option("--yaw-bin-width", o.cfg.yaw_bin_width, "bin width in degrees")
        ->capture_default_str();
    cmd->add_option("--pitch-band-min", o.cfg.pitch_band_min,
                    "lower edge of the level-pitch band")
        ->capture_default_str();
    cmd->add_option("--pitch-band-max", o.cfg.pitch_band_max,
                    "upper edge of the level-pitch band")
        ->capture_default_str();
    cmd->add_option("--seed", o.cfg.seed, "RNG seed")->capture_default_str();
    cmd->add_option("--threads", o.cfg.threads, "worker threads (0 = default)")
        ->capture_default_str();
}

void add_condition_flags(CLI::App* cmd, std::string& condition, double& frontal_max,
                         double& profile_min, std::size_t& min_per_group, double& alpha) {
    cmd->add_option("--condition", condition, "two-group viewing condition")
        ->check(CLI::IsMember({"frontal_vs_profile", "still_vs_video"}))
        ->capture_default_str();
    cmd->add_option("--frontal-max-absyaw", frontal_max, "group A if |yaw| <= this")
        ->capture_default_str();
    cmd->add_option("--profile-min-absyaw", profile_min, "group B if |yaw| >= this")
        ->capture_default_str();
    cmd->add_option("--min-per-group", min_per_group,
                    "identities need this many items in both groups")
        ->capture_default_str();
    cmd->add_option("--alpha", alpha, "significance level before correction")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    const std::string started = iso_now();
    std::string argv_line;
    for (int i = 0; i < argc; ++i) {
        if (i) argv_line += ' ';
        argv_line += argv[i];
    }

    CLI::App app{"audits a learned embedding space: linear probes, invariance maps, "
                 "verification ROC, quality ranking, t-SNE plots"};
    app.require_subcommand(1);

    ProbeOpts probe_o;
    auto* probe_cmd = app.add_subcommand("probe", "bootstrapped linear attribute probe");
    add_common_probe_flags(probe_cmd, probe_o);

    InvarianceOpts inv_o;
    auto* inv_cmd =
        app.add_subcommand("invariance", "identity x feature t-test invariance map");
    inv_cmd->add_option("--features", inv_o.features, "feature matrix (.csv or .emat)")
        ->required();
    inv_cmd->add_option("--meta", inv_o.meta, "metadata CSV")->required();
    inv_cmd->add_option("--out", inv_o.out, "output directory")->capture_default_str();
    add_condition_flags(inv_cmd, inv_o.condition, inv_o.frontal_max_absyaw,
                        inv_o.profile_min_absyaw, inv_o.min_per_group, inv_o.alpha);
    inv_cmd->add_option("--top-k", inv_o.top_k, "how many most-invariant identities to list")
        ->capture_default_str();
    inv_cmd->add_option("--threads", inv_o.threads, "worker threads (0 = default)")
        ->capture_default_str();

    VerifyOpts ver_o;
    auto* ver_cmd = app.add_subcommand(
        "verify", "verification ROC: most-invariant identities vs the rest");
    ver_cmd->add_option("--features", ver_o.features, "feature matrix (.csv or .emat)")
        ->required();
    ver_cmd->add_option("--meta", ver_o.meta, "metadata CSV")->required();
    ver_cmd->add_option("--out", ver_o.out, "output directory")->capture_default_str();
    ver_cmd->add_option("--grouping", ver_o.grouping, "template grouping")
        ->check(CLI::IsMember({"by_template_id", "by_subject", "random_split"}))
        ->capture_default_str();
    ver_cmd->add_option("--split-size", ver_o.split_size, "items per random_split template")
        ->capture_default_str();
    ver_cmd->add_option("--top-k", ver_o.top_k, "size of the invariant identity set")
        ->capture_default_str();
    ver_cmd->add_option("--impostor-cap", ver_o.impostor_cap,
                        "max impostor pairs per arm (seeded subsample beyond)")
        ->capture_default_str();
    ver_cmd->add_option("--seed", ver_o.seed, "RNG seed")->capture_default_str();
    add_condition_flags(ver_cmd, ver_o.condition, ver_o.frontal_max_absyaw,
                        ver_o.profile_min_absyaw, ver_o.min_per_group, ver_o.alpha);
    ver_cmd->add_option("--threads", ver_o.threads, "worker threads (0 = default)")
        ->capture_default_str();

    QualityOpts qual_o;
    auto* qual_cmd =
        app.add_subcommand("quality", "rank items by feature distance from a center");
    qual_cmd->add_option("--features", qual_o.features, "feature matrix (.csv or .emat)")
        ->required();
    qual_cmd->add_option("--out", qual_o.out, "output directory")->capture_default_str();
    qual_cmd->add_option("--center", qual_o.center, "distance reference point")
        ->check(CLI::IsMember({"origin", "centroid"}))
        ->capture_default_str();
    qual_cmd->add_option("--head-count", qual_o.head_count, "lowest-distance items to list")
        ->capture_default_str();
    qual_cmd->add_option("--head-fraction", qual_o.head_fraction,
                         "list round(fraction * n) lowest items instead of --head-count")
        ->capture_default_str();
    qual_cmd->add_option("--band-percentiles", qual_o.band_percentiles,
                         "percentiles to sample bands at")
        ->capture_default_str();
    qual_cmd->add_option("--band-count", qual_o.band_count, "items per percentile band")
        ->capture_default_str();

    TsneOpts tsne_o;
    auto* tsne_cmd = app.add_subcommand("tsne", "2-D t-SNE embedding and scatter plot");
    tsne_cmd->add_option("--features", tsne_o.features, "feature matrix (.csv or .emat)")
        ->required();
    tsne_cmd->add_option("--meta", tsne_o.meta, "metadata CSV (enables point coloring)");
    tsne_cmd->add_option("--out", tsne_o.out, "output directory")->capture_default_str();
    tsne_cmd->add_option("--perplexity", tsne_o.cfg.perplexity, "effective neighbor count")
        ->capture_default_str();
    tsne_cmd->add_option("--iterations", tsne_o.cfg.iterations, "gradient steps")
        ->capture_default_str();
    tsne_cmd->add_option("--learning-rate", tsne_o.cfg.learning_rate, "step size")
        ->capture_default_str();
    tsne_cmd
        ->add_option("--early-exaggeration", tsne_o.cfg.early_exaggeration,
                     "affinity multiplier during the first phase")
        ->capture_default_str();
    tsne_cmd
        ->add_option("--exaggeration-iters", tsne_o.cfg.exaggeration_iters,
                     "length of the exaggerated phase")
        ->capture_default_str();
    tsne_cmd->add_option("--algorithm", tsne_o.algorithm, "gradient evaluation")
        ->check(CLI::IsMember({"exact", "barnes_hut"}))
        ->capture_default_str();
    tsne_cmd->add_option("--theta", tsne_o.cfg.theta, "Barnes-Hut accuracy knob")
        ->capture_default_str();
    tsne_cmd->add_flag("--normalize-input", tsne_o.cfg.normalize_input,
                       "L2-normalize rows before distances");
    tsne_cmd->add_option("--kl-log-every", tsne_o.cfg.kl_log_every,
                         "KL checkpoint interval")
        ->capture_default_str();
    tsne_cmd->add_option("--seed", tsne_o.cfg.seed, "RNG seed")->capture_default_str();
    tsne_cmd->add_option("--color-by", tsne_o.color_by, "scatter point coloring")
        ->check(CLI::IsMember({"subject", "media", "yaw_band", "none"}))
        ->capture_default_str();
    tsne_cmd->add_option("--max-items", tsne_o.max_items,
                         "embed a seeded subsample of at most this many rows (0 = all)")
        ->capture_default_str();
    tsne_cmd->add_option("--threads", tsne_o.cfg.threads, "worker threads (0 = default)")
        ->capture_default_str();

    SynthOpts synth_o;
    auto* synth_cmd =
        app.add_subcommand("synth", "generate a synthetic dataset with planted structure");
    synth_cmd->add_option("--out", synth_o.out, "output directory")->capture_default_str();
    synth_cmd->add_option("--spec", synth_o.spec_path,
                          "JSON file of generator settings (flags override it)");
    synth_cmd->add_option("--format", synth_o.format, "feature file format")
        ->check(CLI::IsMember({"csv", "emat"}))
        ->capture_default_str();
    synth_cmd->add_option("--identities", synth_o.spec.n_identities, "identity count")
        ->capture_default_str();
    synth_cmd
        ->add_option("--items-per-identity", synth_o.spec.items_per_identity,
                     "items per identity")
        ->capture_default_str();
    synth_cmd->add_option("--dims", synth_o.spec.dims, "feature dimensions")
        ->capture_default_str();
    synth_cmd->add_option("--centroid-scale", synth_o.spec.centroid_scale,
                          "sd of identity centroid coordinates")
        ->capture_default_str();
    synth_cmd->add_option("--feature-noise", synth_o.spec.feature_noise,
                          "per-dimension noise sd")
        ->capture_default_str();
    synth_cmd->add_option("--yaw-scale", synth_o.spec.yaw_scale, "pose signal magnitude")
        ->capture_default_str();
    synth_cmd->add_option("--yaw-noise-deg", synth_o.spec.yaw_noise_deg,
                          "yaw channel noise sd in degrees")
        ->capture_default_str();
    synth_cmd->add_option("--yaw-shape", synth_o.yaw_shape, "pose signal shape")
        ->check(CLI::IsMember({"sine", "linear"}))
        ->capture_default_str();
    synth_cmd->add_option("--media-shift", synth_o.spec.media_shift,
                          "still-image direction shift")
        ->capture_default_str();
    synth_cmd
        ->add_option("--invariant-fraction", synth_o.spec.invariant_fraction,
                     "fraction of identities planted pose-invariant")
        ->capture_default_str();
    synth_cmd
        ->add_option("--invariant-snr-boost", synth_o.spec.invariant_snr_boost,
                     "noise divisor for invariant identities")
        ->capture_default_str();
    synth_cmd->add_option("--quality-lo", synth_o.spec.quality_lo, "quality range low end")
        ->capture_default_str();
    synth_cmd->add_option("--quality-hi", synth_o.spec.quality_hi, "quality range high end")
        ->capture_default_str();
    synth_cmd->add_option("--still-prob", synth_o.spec.still_prob,
                          "probability an item is a still image")
        ->capture_default_str();
    synth_cmd->add_option("--template-size", synth_o.spec.template_size,
                          "items per template")
        ->capture_default_str();
    synth_cmd->add_option("--yaw-min", synth_o.spec.yaw_min, "yaw range low end")
        ->capture_default_str();
    synth_cmd->add_option("--yaw-max", synth_o.spec.yaw_max, "yaw range high end")
        ->capture_default_str();
    synth_cmd->add_option("--pitch-sd", synth_o.spec.pitch_sd, "pitch sd in degrees")
        ->capture_default_str();
    synth_cmd->add_option("--roll-sd", synth_o.spec.roll_sd, "roll sd in degrees")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth_o.spec.seed, "RNG seed")->capture_default_str();

    ConvertOpts conv_o;
    auto* conv_cmd = app.add_subcommand("convert", "re-encode a feature matrix (CSV <-> EMAT)");
    conv_cmd->add_option("--features", conv_o.features, "feature matrix (.csv or .emat)")
        ->required();
    conv_cmd->add_option("--out", conv_o.out, "output directory")->capture_default_str();
    conv_cmd->add_option("--format", conv_o.format, "output format")
        ->check(CLI::IsMember({"csv", "emat"}))
        ->capture_default_str();

    AuditOpts audit_o;
    auto* audit_cmd =
        app.add_subcommand("audit", "full battery: probes, invariance, verify, quality, tsne");
    audit_cmd->add_option("--features", audit_o.features, "feature matrix (.csv or .emat)")
        ->required();
    audit_cmd->add_option("--meta", audit_o.meta, "metadata CSV")->required();
    audit_cmd->add_option("--out", audit_o.out, "output directory")->capture_default_str();
    audit_cmd->add_option("--seed", audit_o.seed, "RNG seed")->capture_default_str();
    audit_cmd->add_option("--threads", audit_o.threads, "worker threads (0 = default)")
        ->capture_default_str();
    audit_cmd->add_option("--probe-iterations", audit_o.probe_iterations,
                          "bootstrap iterations per probe")
        ->capture_default_str();
    audit_cmd->add_option("--train-count", audit_o.train_count, "absolute train-set size")
        ->capture_default_str();
    audit_cmd->add_option("--train-fraction", audit_o.train_fraction,
                          "train fraction when train-count does not fit")
        ->capture_default_str();
    audit_cmd->add_option("--ridge-lambda", audit_o.ridge_lambda, "ridge penalty")
        ->capture_default_str();
    audit_cmd->add_option("--lda-shrinkage", audit_o.lda_shrinkage,
                          "LDA covariance shrinkage")
        ->capture_default_str();
    add_condition_flags(audit_cmd, audit_o.condition, audit_o.frontal_max_absyaw,
                        audit_o.profile_min_absyaw, audit_o.min_per_group, audit_o.alpha);
    audit_cmd->add_option("--top-k", audit_o.top_k, "size of the invariant identity set")
        ->capture_default_str();
    audit_cmd->add_option("--grouping", audit_o.grouping, "template grouping")
        ->check(CLI::IsMember({"by_template_id", "by_subject", "random_split"}))
        ->capture_default_str();
    audit_cmd->add_option("--split-size", audit_o.split_size,
                          "items per random_split template")
        ->capture_default_str();
    audit_cmd->add_option("--impostor-cap", audit_o.impostor_cap,
                          "max impostor pairs per arm")
        ->capture_default_str();
    audit_cmd->add_option("--center", audit_o.center, "quality distance reference")
        ->check(CLI::IsMember({"origin", "centroid"}))
        ->capture_default_str();
    audit_cmd->add_option("--head-count", audit_o.head_count,
                          "lowest-distance items to list")
        ->capture_default_str();
    audit_cmd->add_option("--head-fraction", audit_o.head_fraction,
                          "list round(fraction * n) lowest items instead")
        ->capture_default_str();
    audit_cmd->add_option("--band-count", audit_o.band_count, "items per percentile band")
        ->capture_default_str();
    audit_cmd->add_option("--perplexity", audit_o.perplexity, "t-SNE perplexity")
        ->capture_default_str();
    audit_cmd->add_option("--tsne-iterations", audit_o.tsne_iterations,
                          "t-SNE gradient steps")
        ->capture_default_str();
    audit_cmd->add_option("--learning-rate", audit_o.learning_rate, "t-SNE step size")
        ->capture_default_str();
    audit_cmd->add_option("--tsne-algorithm", audit_o.algorithm,
                          "t-SNE gradient evaluation")
        ->check(CLI::IsMember({"exact", "barnes_hut"}))
        ->capture_default_str();
    audit_cmd->add_option("--theta", audit_o.theta, "Barnes-Hut accuracy knob")
        ->capture_default_str();
    audit_cmd->add_flag("--normalize-input", audit_o.normalize_input,
                        "L2-normalize rows before t-SNE distances");
    audit_cmd->add_option("--kl-log-every", audit_o.kl_log_every,
                          "KL checkpoint interval")
        ->capture_default_str();
    audit_cmd->add_option("--max-items", audit_o.max_items,
                          "t-SNE seeded subsample cap (0 = all)")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // --help exits 0; anything else is a usage error
    }

    std::string active = "?";
    int threads = 0;
    try {
        if (probe_cmd->parsed()) {
            active = "probe";
            threads = probe_o.cfg.threads;
            const fs::path outdir = probe_o.out;
            fs::create_directories(outdir);
            probe_o.cfg.task = parse_task(probe_o.target);
            probe_o.cfg.model = parse_model(probe_o.model);
            const Dataset ds = load_joined(probe_o.features, probe_o.meta);
            write_report(outdir / "probe_report.json",
                         probe_report_json(ds, probe_o.cfg, probe_config_echo(probe_o)));
        } else if (inv_cmd->parsed()) {
            active = "invariance";
            threads = inv_o.threads;
            const fs::path outdir = inv_o.out;
            fs::create_directories(outdir);
            const Dataset ds = load_joined(inv_o.features, inv_o.meta);
            write_report(outdir / "invariance_report.json",
                         invariance_report_json(ds, inv_o, outdir, nullptr));
        } else if (ver_cmd->parsed()) {
            active = "verify";
            threads = ver_o.threads;
            const fs::path outdir = ver_o.out;
            fs::create_directories(outdir);
            const Dataset ds = load_joined(ver_o.features, ver_o.meta);
            const ConditionSpec cond = make_condition_spec(
                ver_o.condition, ver_o.frontal_max_absyaw, ver_o.profile_min_absyaw);
            const InvarianceMap map = compute_invariance_map(
                ds, cond, ver_o.min_per_group, ver_o.alpha, ver_o.threads);
            write_report(outdir / "verify_report.json",
                         verify_report_json(ds, map, ver_o, outdir));
        } else if (qual_cmd->parsed()) {
            active = "quality";
            const fs::path outdir = qual_o.out;
            fs::create_directories(outdir);
            const FeatureMatrix fm = load_features(
                qual_o.features, feature_format_from_path(qual_o.features));
            write_report(outdir / "quality_report.json",
                         quality_report_json(fm, qual_o, outdir));
        } else if (tsne_cmd->parsed()) {
            active = "tsne";
            threads = tsne_o.cfg.threads;
            const fs::path outdir = tsne_o.out;
            fs::create_directories(outdir);
            write_report(outdir / "tsne_report.json", tsne_report_json(tsne_o, outdir));
        } else if (synth_cmd->parsed()) {
            active = "synth";
            const fs::path outdir = synth_o.out;
            fs::create_directories(outdir);
            SynthSpec spec;
            if (!synth_o.spec_path.empty()) spec = synth_spec_from_json(synth_o.spec_path);
            // Explicit flags override whatever the spec file said.
            auto given = [&](const char* flag) { return synth_cmd->count(flag) > 0; };
            if (given("--identities")) spec.n_identities = synth_o.spec.n_identities;
            if (given("--items-per-identity"))
                spec.items_per_identity = synth_o.spec.items_per_identity;
            if (given("--dims")) spec.dims = synth_o.spec.dims;
            if (given("--centroid-scale")) spec.centroid_scale = synth_o.spec.centroid_scale;
            if (given("--feature-noise")) spec.feature_noise = synth_o.spec.feature_noise;
            if (given("--yaw-scale")) spec.yaw_scale = synth_o.spec.yaw_scale;
            if (given("--yaw-noise-deg")) spec.yaw_noise_deg = synth_o.spec.yaw_noise_deg;
            if (given("--yaw-shape")) spec.yaw_shape = parse_shape(synth_o.yaw_shape);
            if (given("--media-shift")) spec.media_shift = synth_o.spec.media_shift;
            if (given("--invariant-fraction"))
                spec.invariant_fraction = synth_o.spec.invariant_fraction;
            if (given("--invariant-snr-boost"))
                spec.invariant_snr_boost = synth_o.spec.invariant_snr_boost;
            if (given("--quality-lo")) spec.quality_lo = synth_o.spec.quality_lo;
            if (given("--quality-hi")) spec.quality_hi = synth_o.spec.quality_hi;
            if (given("--still-prob")) spec.still_prob = synth_o.spec.still_prob;
            if (given("--template-size")) spec.template_size = synth_o.spec.template_size;
            if (given("--yaw-min")) spec.yaw_min = synth_o.spec.yaw_min;
            if (given("--yaw-max")) spec.yaw_max = synth_o.spec.yaw_max;
            if (given("--pitch-sd")) spec.pitch_sd = synth_o.spec.pitch_sd;
            if (given("--roll-sd")) spec.roll_sd = synth_o.spec.roll_sd;
            if (given("--seed")) spec.seed = synth_o.spec.seed;
            write_report(outdir / "ground_truth.json",
                         synth_report_json(synth_o, spec, outdir));
        } else if (conv_cmd->parsed()) {
            active = "convert";
            const fs::path outdir = conv_o.out;
            fs::create_directories(outdir);
            write_report(outdir / "convert_report.json",
                         convert_report_json(conv_o, outdir));
        } else if (audit_cmd->parsed()) {
            active = "audit";
            threads = audit_o.threads;
            const fs::path outdir = audit_o.out;
            fs::create_directories(outdir);
            run_audit(audit_o, outdir);
        }

        const fs::path outdir = probe_cmd->parsed()   ? probe_o.out
                                : inv_cmd->parsed()   ? inv_o.out
                                : ver_cmd->parsed()   ? ver_o.out
                                : qual_cmd->parsed()  ? qual_o.out
                                : tsne_cmd->parsed()  ? tsne_o.out
                                : synth_cmd->parsed() ? synth_o.out
                                : conv_cmd->parsed()  ? conv_o.out
                                                      : audit_o.out;
        write_manifest(outdir, kToolVersion);
        // Wall-clock facts are quarantined here; the manifest skips this file
        // so identical runs stay byte-identical everywhere else.
        write_text(outdir / "run.log", "start " + started + "\nargv " + argv_line +
                                           "\nthreads " + std::to_string(threads) +
                                           "\nend " + iso_now() + "\n");
    } catch (const std::exception& e) {
        std::cerr << "embaudit " << active << ": error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
