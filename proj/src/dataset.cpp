#include "embaudit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace embaudit {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<std::string> split_line(const std::string& line, char delim = ',') {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& cell, const std::string& context) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) {
        fail(context + ": cannot parse number '" + cell + "'");
    }
    return v;
}

float parse_float(const std::string& cell, const std::string& context) {
    float v = 0.0f;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) {
        fail(context + ": cannot parse number '" + cell + "'");
    }
    return v;
}

void check_duplicates(const std::vector<std::string>& ids, const std::string& context) {
    std::unordered_set<std::string> seen;
    seen.reserve(ids.size());
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            fail(context + ": duplicate item_id '" + id + "'");
        }
    }
}

FeatureMatrix load_features_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("load_features: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail("load_features: " + path.string() + ": empty file");
    const auto header = split_line(line);
    if (header.size() < 2 || header[0] != "item_id") {
        fail("load_features: " + path.string() +
             ": malformed header, expected 'item_id,f0,...'");
    }
    FeatureMatrix fm;
    fm.cols = header.size() - 1;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        const auto cells = split_line(line);
        const std::string where = "load_features: " + path.string() + ": row " +
                                  std::to_string(row);
        if (cells.size() != header.size()) {
            fail(where + ": ragged row, expected " + std::to_string(header.size()) +
                 " cells, got " + std::to_string(cells.size()));
        }
        fm.item_ids.push_back(cells[0]);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            const float v = parse_float(cells[j], where + ", col " + header[j]);
            if (!std::isfinite(v)) {
                fail(where + ", col " + header[j] + ": non-finite value '" + cells[j] + "'");
            }
            fm.values.push_back(v);
        }
    }
    fm.rows = fm.item_ids.size();
    check_duplicates(fm.item_ids, "load_features: " + path.string());
    return fm;
}

constexpr char kEmatMagic[4] = {'E', 'M', 'A', 'T'};
constexpr std::uint32_t kEmatVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
void read_raw(std::ifstream& in, T& v, const std::string& context) {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) fail(context + ": truncated file");
}

FeatureMatrix load_features_emat(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("load_features: cannot open " + path.string());
    const std::string ctx = "load_features: " + path.string();
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kEmatMagic, 4) != 0) {
        fail(ctx + ": not an EMAT file (bad magic)");
    }
    std::uint32_t version = 0;
    read_raw(in, version, ctx);
    if (version != kEmatVersion) {
        fail(ctx + ": unsupported EMAT version " + std::to_string(version));
    }
    std::uint64_t rows = 0, cols = 0;
    read_raw(in, rows, ctx);
    read_raw(in, cols, ctx);
    FeatureMatrix fm;
    fm.rows = rows;
    fm.cols = cols;
    fm.values.resize(rows * cols);
    in.read(reinterpret_cast<char*>(fm.values.data()),
            static_cast<std::streamsize>(fm.values.size() * sizeof(float)));
    if (!in) fail(ctx + ": truncated value block");
    for (std::size_t i = 0; i < fm.values.size(); ++i) {
        if (!std::isfinite(fm.values[i])) {
            fail(ctx + ": non-finite value at row " + std::to_string(i / cols + 1) +
                 ", col f" + std::to_string(i % cols));
        }
    }
    fm.item_ids.reserve(rows);
    for (std::uint64_t i = 0; i < rows; ++i) {
        std::uint32_t len = 0;
        read_raw(in, len, ctx);
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (!in) fail(ctx + ": truncated item_id list");
        fm.item_ids.push_back(std::move(id));
    }
    check_duplicates(fm.item_ids, ctx);
    return fm;
}

void save_features_csv(const FeatureMatrix& fm, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail("save_features: cannot open " + path.string());
    out << "item_id";
    for (std::size_t j = 0; j < fm.cols; ++j) out << ",f" << j;
    out << "\n";
    char buf[32];
    for (std::size_t i = 0; i < fm.rows; ++i) {
        out << fm.item_ids[i];
        for (std::size_t j = 0; j < fm.cols; ++j) {
            // 9 significant digits round-trip float32 exactly.
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(fm.row(i)[j]));
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) fail("save_features: write failed for " + path.string());
}

void save_features_emat(const FeatureMatrix& fm, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("save_features: cannot open " + path.string());
    out.write(kEmatMagic, 4);
    write_raw(out, kEmatVersion);
    write_raw(out, static_cast<std::uint64_t>(fm.rows));
    write_raw(out, static_cast<std::uint64_t>(fm.cols));
    out.write(reinterpret_cast<const char*>(fm.values.data()),
              static_cast<std::streamsize>(fm.values.size() * sizeof(float)));
    for (const auto& id : fm.item_ids) {
        write_raw(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    if (!out) fail("save_features: write failed for " + path.string());
}

}  // namespace

const char* media_type_name(MediaType m) {
    return m == MediaType::still ? "still" : "video";
}

const char* field_name(Field f) {
    switch (f) {
        case Field::subject_id: return "subject_id";
        case Field::media_type: return "media_type";
        case Field::yaw_deg: return "yaw_deg";
        case Field::pitch_deg: return "pitch_deg";
        case Field::roll_deg: return "roll_deg";
        case Field::template_id: return "template_id";
    }
    return "?";
}

bool has_field(const MetadataRecord& r, Field f) {
    switch (f) {
        case Field::subject_id: return !r.subject_id.empty();
        case Field::media_type: return r.media_type.has_value();
        case Field::yaw_deg: return r.yaw_deg.has_value();
        case Field::pitch_deg: return r.pitch_deg.has_value();
        case Field::roll_deg: return r.roll_deg.has_value();
        case Field::template_id: return r.template_id.has_value();
    }
    return false;
}

FeatureFormat feature_format_from_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return FeatureFormat::csv;
    if (ext == ".emat") return FeatureFormat::emat;
    fail("cannot infer feature format from extension '" + ext + "' (use .csv or .emat)");
}

FeatureMatrix load_features(const std::filesystem::path& path, FeatureFormat format) {
    return format == FeatureFormat::csv ? load_features_csv(path)
                                        : load_features_emat(path);
}

void save_features(const FeatureMatrix& fm, const std::filesystem::path& path,
                   FeatureFormat format) {
    if (fm.rows != fm.item_ids.size() || fm.values.size() != fm.rows * fm.cols) {
        fail("save_features: inconsistent matrix shape");
    }
    if (format == FeatureFormat::csv) {
        save_features_csv(fm, path);
    } else {
        save_features_emat(fm, path);
    }
}

std::vector<MetadataRecord> load_metadata(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("load_metadata: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail("load_metadata: " + path.string() + ": empty file");
    static const std::vector<std::string> expected = {
        "item_id", "subject_id", "media_type", "yaw_deg",
        "pitch_deg", "roll_deg", "template_id"};
    const auto header = split_line(line);
    if (header != expected) {
        fail("load_metadata: " + path.string() +
             ": malformed header, expected 'item_id,subject_id,media_type,"
             "yaw_deg,pitch_deg,roll_deg,template_id'");
    }
    std::vector<MetadataRecord> records;
    std::unordered_set<std::string> seen;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        const auto cells = split_line(line);
        const std::string where =
            "load_metadata: " + path.string() + ": row " + std::to_string(row);
        if (cells.size() != expected.size()) {
            fail(where + ": ragged row");
        }
        MetadataRecord r;
        r.item_id = cells[0];
        if (r.item_id.empty()) fail(where + ": empty item_id");
        if (!seen.insert(r.item_id).second) {
            fail(where + ": duplicate item_id '" + r.item_id + "'");
        }
        r.subject_id = cells[1];
        if (!cells[2].empty()) {
            if (cells[2] == "still") {
                r.media_type = MediaType::still;
            } else if (cells[2] == "video" || cells[2] == "video_frame") {
                r.media_type = MediaType::video_frame;
            } else {
                fail(where + ": invalid media_type '" + cells[2] + "'");
            }
        }
        if (!cells[3].empty()) {
            const double yaw = parse_double(cells[3], where + ", yaw_deg");
            if (yaw < -90.0 || yaw > 90.0) {
                fail(where + ": yaw_deg " + cells[3] + " outside [-90, 90]");
            }
            r.yaw_deg = yaw;
        }
        if (!cells[4].empty()) r.pitch_deg = parse_double(cells[4], where + ", pitch_deg");
        if (!cells[5].empty()) r.roll_deg = parse_double(cells[5], where + ", roll_deg");
        if (!cells[6].empty()) r.template_id = cells[6];
        records.push_back(std::move(r));
    }
    return records;
}

void save_metadata(const std::vector<MetadataRecord>& records,
                   const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail("save_metadata: cannot open " + path.string());
    out << "item_id,subject_id,media_type,yaw_deg,pitch_deg,roll_deg,template_id\n";
    char buf[32];
    auto put = [&](const std::optional<double>& v) {
        out << ',';
        if (v) {
            std::snprintf(buf, sizeof(buf), "%.17g", *v);
            out << buf;
        }
    };
    for (const auto& r : records) {
        out << r.item_id << ',' << r.subject_id << ',';
        if (r.media_type) out << media_type_name(*r.media_type);
        put(r.yaw_deg);
        put(r.pitch_deg);
        put(r.roll_deg);
        out << ',';
        if (r.template_id) out << *r.template_id;
        out << "\n";
    }
    if (!out) fail("save_metadata: write failed for " + path.string());
}

Dataset join(const FeatureMatrix& features, const std::vector<MetadataRecord>& records,
             const std::vector<Field>& required) {
    std::unordered_map<std::string, std::size_t> by_id;
    by_id.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        by_id.emplace(records[i].item_id, i);
    }

    Dataset ds;
    ds.features.cols = features.cols;
    std::unordered_set<std::string> feature_ids(features.item_ids.begin(),
                                                features.item_ids.end());

    for (std::size_t i = 0; i < features.rows; ++i) {
        const auto& id = features.item_ids[i];
        const auto it = by_id.find(id);
        if (it == by_id.end()) {
            ds.dropped.push_back({id, "missing_metadata"});
            continue;
        }
        const MetadataRecord& rec = records[it->second];
        const Field* missing = nullptr;
        for (const Field& f : required) {
            if (!has_field(rec, f)) {
                missing = &f;
                break;
            }
        }
        if (missing) {
            ds.dropped.push_back({id, std::string("missing_field:") + field_name(*missing)});
            continue;
        }
        ds.features.item_ids.push_back(id);
        ds.features.values.insert(ds.features.values.end(), features.row(i),
                                  features.row(i) + features.cols);
        ds.metadata.push_back(rec);
    }
    ds.features.rows = ds.features.item_ids.size();

    // Metadata-only ids, in record order.
    for (const auto& rec : records) {
        if (!feature_ids.count(rec.item_id)) {
            ds.dropped.push_back({rec.item_id, "missing_features"});
        }
    }

    if (ds.metadata.empty()) {
        fail("join: empty intersection between features and metadata");
    }
    return ds;
}

Dataset join(const Dataset& ds, const std::vector<Field>& required) {
    Dataset out = join(ds.features, ds.metadata, required);
    // Carry the existing ledger forward so re-joining is idempotent.
    out.dropped.insert(out.dropped.begin(), ds.dropped.begin(), ds.dropped.end());
    return out;
}

std::vector<std::string> select_identities(const Dataset& ds, const ConditionSpec& condition,
                                           std::size_t min_per_group) {
    const auto groups = assign_groups(ds, condition);
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.metadata[i].subject_id.empty()) continue;
        if (groups[i] == Group::A) {
            counts[ds.metadata[i].subject_id].first++;
        } else if (groups[i] == Group::B) {
            counts[ds.metadata[i].subject_id].second++;
        }
    }
    std::vector<std::string> out;
    for (const auto& [subject, c] : counts) {
        if (c.first >= min_per_group && c.second >= min_per_group) {
            out.push_back(subject);
        }
    }
    return out;  // std::map iteration is already sorted by label
}

}  // namespace embaudit
