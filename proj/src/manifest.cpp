#include "embaudit/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace embaudit {

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("fnv1a64_file: cannot open " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    return hash;
}

void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& tool_version) {
    std::vector<ManifestEntry> entries;
    for (const auto& de : std::filesystem::recursive_directory_iterator(out_dir)) {
        if (!de.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(de.path(), out_dir).generic_string();
        if (rel == "manifest.json" || rel == "run.log") continue;
        ManifestEntry e;
        e.path = rel;
        e.bytes = de.file_size();
        char hex[17];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a64_file(de.path())));
        e.fnv1a64_hex = hex;
        entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });

    nlohmann::ordered_json doc;
    doc["tool_version"] = tool_version;
    doc["hash"] = "fnv1a64";
    doc["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        doc["artifacts"].push_back(
            {{"path", e.path}, {"bytes", e.bytes}, {"fnv1a64", e.fnv1a64_hex}});
    }
    std::ofstream out(out_dir / "manifest.json", std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_manifest: cannot open " +
                                 (out_dir / "manifest.json").string());
    }
    out << doc.dump(2) << "\n";
}

}  // namespace embaudit
