#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "embaudit/dataset.hpp"
#include "embaudit/rng.hpp"

using namespace embaudit;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static int counter = 0;
    const fs::path p =
        fs::temp_directory_path() / ("embaudit_dataset_" + std::to_string(counter++));
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    FeatureMatrix fm;
    fm.rows = rows;
    fm.cols = cols;
    fm.values.resize(rows * cols);
    Rng rng(seed);
    for (auto& v : fm.values) v = static_cast<float>(rng.normal() * 3.0);
    for (std::size_t i = 0; i < rows; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "item%04zu", i);
        fm.item_ids.push_back(buf);
    }
    return fm;
}

MetadataRecord record(const std::string& item, const std::string& subject) {
    MetadataRecord r;
    r.item_id = item;
    r.subject_id = subject;
    r.media_type = MediaType::still;
    r.yaw_deg = 10.0;
    r.pitch_deg = 1.0;
    r.roll_deg = 0.0;
    r.template_id = subject + "_t0";
    return r;
}

}  // namespace

TEST_CASE("feature CSV parse and shape") {
    const auto dir = temp_dir();
    write_text(dir / "f.csv",
               "item_id,f0,f1\n"
               "a,1.5,2\n"
               "b,-0.25,3e-2\n"
               "c,0,4\n");
    const auto fm = load_features(dir / "f.csv", FeatureFormat::csv);
    CHECK(fm.rows == 3);
    CHECK(fm.cols == 2);
    CHECK(fm.item_ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(fm.at(0, 0) == 1.5);
    CHECK(fm.at(1, 0) == -0.25);
    CHECK(fm.at(2, 1) == 4.0);
}

TEST_CASE("feature CSV rejects malformed input naming the spot") {
    const auto dir = temp_dir();

    write_text(dir / "bad_header.csv", "id,f0\na,1\n");
    CHECK_THROWS_WITH_AS(load_features(dir / "bad_header.csv", FeatureFormat::csv),
                         doctest::Contains("header"), std::runtime_error);

    write_text(dir / "ragged.csv", "item_id,f0,f1\na,1\n");
    CHECK_THROWS_WITH_AS(load_features(dir / "ragged.csv", FeatureFormat::csv),
                         doctest::Contains("ragged"), std::runtime_error);

    write_text(dir / "nan.csv", "item_id,f0\na,1\nb,NaN\n");
    CHECK_THROWS_WITH_AS(load_features(dir / "nan.csv", FeatureFormat::csv),
                         doctest::Contains("row 2"), std::runtime_error);

    write_text(dir / "dup.csv", "item_id,f0\na,1\na,2\n");
    CHECK_THROWS_WITH_AS(load_features(dir / "dup.csv", FeatureFormat::csv),
                         doctest::Contains("duplicate"), std::runtime_error);

    CHECK_THROWS_AS(load_features(dir / "missing.csv", FeatureFormat::csv),
                    std::runtime_error);
}

TEST_CASE("feature CSV round-trips float32 exactly") {
    const auto dir = temp_dir();
    auto fm = random_matrix(50, 17, 1);
    // Awkward values that expose sloppy formatting.
    fm.values[0] = 0.1f;
    fm.values[1] = 1.0f / 3.0f;
    fm.values[2] = 16777216.0f;
    fm.values[3] = -1.1754944e-38f;
    save_features(fm, dir / "f.csv", FeatureFormat::csv);
    const auto back = load_features(dir / "f.csv", FeatureFormat::csv);
    CHECK(back.rows == fm.rows);
    CHECK(back.cols == fm.cols);
    CHECK(back.item_ids == fm.item_ids);
    CHECK(back.values == fm.values);  // bit-for-bit float equality
}

TEST_CASE("EMAT round-trip is bit-exact in both directions") {
    const auto dir = temp_dir();
    const auto fm = random_matrix(100, 320, 2);
    save_features(fm, dir / "m.emat", FeatureFormat::emat);

    const auto back = load_features(dir / "m.emat", FeatureFormat::emat);
    CHECK(back.values == fm.values);
    CHECK(back.item_ids == fm.item_ids);
    CHECK(back.rows == fm.rows);
    CHECK(back.cols == fm.cols);

    // Re-saving the loaded matrix must reproduce the file bytes.
    save_features(back, dir / "m2.emat", FeatureFormat::emat);
    CHECK(slurp(dir / "m.emat") == slurp(dir / "m2.emat"));
}

TEST_CASE("EMAT loader rejects corrupt files") {
    const auto dir = temp_dir();
    write_text(dir / "bad.emat", "NOTEMATDATA");
    CHECK_THROWS_WITH_AS(load_features(dir / "bad.emat", FeatureFormat::emat),
                         doctest::Contains("magic"), std::runtime_error);

    const auto fm = random_matrix(4, 3, 3);
    save_features(fm, dir / "ok.emat", FeatureFormat::emat);
    auto bytes = slurp(dir / "ok.emat");
    bytes.resize(bytes.size() / 2);
    write_text(dir / "trunc.emat", bytes);
    CHECK_THROWS_WITH_AS(load_features(dir / "trunc.emat", FeatureFormat::emat),
                         doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("format inference from extension") {
    CHECK(feature_format_from_path("x/y.csv") == FeatureFormat::csv);
    CHECK(feature_format_from_path("x/y.emat") == FeatureFormat::emat);
    CHECK_THROWS_AS(feature_format_from_path("x/y.bin"), std::runtime_error);
}

TEST_CASE("metadata CSV parse, missing cells, round trip") {
    const auto dir = temp_dir();
    write_text(dir / "m.csv",
               "item_id,subject_id,media_type,yaw_deg,pitch_deg,roll_deg,template_id\n"
               "a,s1,still,-45.5,2,0.5,t1\n"
               "b,s1,video,,,,\n"
               "c,,,,,,\n");
    const auto recs = load_metadata(dir / "m.csv");
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].item_id == "a");
    CHECK(recs[0].subject_id == "s1");
    CHECK(recs[0].media_type == MediaType::still);
    CHECK(recs[0].yaw_deg == -45.5);
    CHECK(recs[0].template_id == "t1");
    CHECK(recs[1].media_type == MediaType::video_frame);
    CHECK_FALSE(recs[1].yaw_deg.has_value());
    CHECK_FALSE(recs[1].template_id.has_value());
    CHECK(recs[2].subject_id.empty());
    CHECK_FALSE(recs[2].media_type.has_value());

    save_metadata(recs, dir / "m2.csv");
    const auto again = load_metadata(dir / "m2.csv");
    REQUIRE(again.size() == 3);
    CHECK(again[0].yaw_deg == recs[0].yaw_deg);
    CHECK(again[1].media_type == recs[1].media_type);
    CHECK_FALSE(again[2].pitch_deg.has_value());
}

TEST_CASE("metadata CSV validation") {
    const auto dir = temp_dir();
    write_text(dir / "hdr.csv", "item_id,subject\na,s\n");
    CHECK_THROWS_WITH_AS(load_metadata(dir / "hdr.csv"), doctest::Contains("header"),
                         std::runtime_error);

    write_text(dir / "yaw.csv",
               "item_id,subject_id,media_type,yaw_deg,pitch_deg,roll_deg,template_id\n"
               "a,s1,still,95,,,\n");
    CHECK_THROWS_WITH_AS(load_metadata(dir / "yaw.csv"), doctest::Contains("[-90, 90]"),
                         std::runtime_error);

    write_text(dir / "mt.csv",
               "item_id,subject_id,media_type,yaw_deg,pitch_deg,roll_deg,template_id\n"
               "a,s1,photo,0,,,\n");
    CHECK_THROWS_WITH_AS(load_metadata(dir / "mt.csv"), doctest::Contains("media_type"),
                         std::runtime_error);

    write_text(dir / "dup.csv",
               "item_id,subject_id,media_type,yaw_deg,pitch_deg,roll_deg,template_id\n"
               "a,s1,still,0,,,\na,s1,still,1,,,\n");
    CHECK_THROWS_WITH_AS(load_metadata(dir / "dup.csv"), doctest::Contains("duplicate"),
                         std::runtime_error);
}

TEST_CASE("join keeps the id intersection in feature-row order") {
    auto fm = random_matrix(5, 2, 4);
    std::vector<MetadataRecord> recs;
    for (const auto& id : fm.item_ids) recs.push_back(record(id, "s1"));
    const auto ds = join(fm, recs);
    CHECK(ds.size() == 5);
    CHECK(ds.dropped.empty());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.features.item_ids[i] == ds.metadata[i].item_id);
        CHECK(ds.features.item_ids[i] == fm.item_ids[i]);
    }
}

TEST_CASE("join ledger records every exclusion with its reason") {
    auto fm = random_matrix(5, 2, 5);
    std::vector<MetadataRecord> recs;
    // item0000 has no metadata at all -> missing_metadata.
    for (std::size_t i = 1; i < 5; ++i) recs.push_back(record(fm.item_ids[i], "s1"));
    // item0001 lacks yaw -> missing_field:yaw_deg when yaw is required.
    recs[0].yaw_deg.reset();
    // A metadata-only row -> missing_features.
    recs.push_back(record("ghost", "s9"));

    const auto ds = join(fm, recs, {Field::yaw_deg});
    CHECK(ds.size() == 3);
    std::set<std::pair<std::string, std::string>> dropped;
    for (const auto& d : ds.dropped) dropped.insert({d.item_id, d.reason});
    CHECK(dropped.count({"item0000", "missing_metadata"}) == 1);
    CHECK(dropped.count({"item0001", "missing_field:yaw_deg"}) == 1);
    CHECK(dropped.count({"ghost", "missing_features"}) == 1);

    // retained + dropped covers the id universe exactly once.
    CHECK(ds.size() + ds.dropped.size() == 6);
}

TEST_CASE("join is idempotent including the ledger") {
    auto fm = random_matrix(6, 3, 6);
    std::vector<MetadataRecord> recs;
    for (std::size_t i = 0; i < 4; ++i) recs.push_back(record(fm.item_ids[i], "s1"));
    recs[2].media_type.reset();

    const auto once = join(fm, recs, {Field::media_type});
    const auto twice = join(once, {Field::media_type});
    CHECK(twice.features.values == once.features.values);
    CHECK(twice.features.item_ids == once.features.item_ids);
    CHECK(twice.dropped == once.dropped);
    REQUIRE(twice.metadata.size() == once.metadata.size());
    for (std::size_t i = 0; i < once.metadata.size(); ++i) {
        CHECK(twice.metadata[i].item_id == once.metadata[i].item_id);
    }
}

TEST_CASE("join with empty intersection fails") {
    auto fm = random_matrix(2, 2, 7);
    std::vector<MetadataRecord> recs = {record("other", "s1")};
    CHECK_THROWS_WITH_AS(join(fm, recs), doctest::Contains("empty intersection"),
                         std::runtime_error);
}

TEST_CASE("select_identities enforces the both-groups minimum, sorted") {
    // s_b: 2 frontal / 2 profile; s_a: 2/2; s_c: 1 frontal / 3 profile.
    FeatureMatrix fm = random_matrix(12, 2, 8);
    std::vector<MetadataRecord> recs;
    const char* subjects[] = {"s_b", "s_a", "s_c"};
    const double yaws[3][4] = {
        {0.0, 10.0, 70.0, 80.0}, {5.0, 15.0, 65.0, 85.0}, {0.0, 61.0, 62.0, 63.0}};
    for (int s = 0; s < 3; ++s) {
        for (int i = 0; i < 4; ++i) {
            auto r = record(fm.item_ids[static_cast<std::size_t>(s * 4 + i)], subjects[s]);
            r.yaw_deg = yaws[s][i];
            recs.push_back(r);
        }
    }
    const auto ds = join(fm, recs);
    ConditionSpec cond;  // frontal_vs_profile, 20/60 thresholds
    const auto picked = select_identities(ds, cond, 2);
    CHECK(picked == std::vector<std::string>{"s_a", "s_b"});

    // Boundary: exactly min_per_group in both groups is included.
    const auto loose = select_identities(ds, cond, 1);
    CHECK(loose == std::vector<std::string>{"s_a", "s_b", "s_c"});

    // min too high: empty list, not an error.
    CHECK(select_identities(ds, cond, 3).empty());
}

TEST_CASE("still/video condition groups by media type") {
    FeatureMatrix fm = random_matrix(4, 2, 9);
    std::vector<MetadataRecord> recs;
    for (std::size_t i = 0; i < 4; ++i) {
        auto r = record(fm.item_ids[i], "s1");
        r.media_type = i < 2 ? MediaType::still : MediaType::video_frame;
        recs.push_back(r);
    }
    const auto ds = join(fm, recs);
    ConditionSpec cond;
    cond.kind = ConditionSpec::Kind::still_vs_video;
    CHECK(select_identities(ds, cond, 2) == std::vector<std::string>{"s1"});

    const auto groups = assign_groups(ds, cond);
    CHECK(groups[0] == Group::A);
    CHECK(groups[3] == Group::B);
}
