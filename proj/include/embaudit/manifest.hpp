#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace embaudit {

// FNV-1a 64-bit over a byte range / file contents.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);

struct ManifestEntry {
    std::string path;   // relative to the output directory
    std::uint64_t bytes = 0;
    std::string fnv1a64_hex;  // 16 lowercase hex digits
};

// Hashes every regular file under `out_dir` except the manifest itself and
// run.log, sorted by relative path, and writes manifest.json. Contains no
// timestamps so identical runs produce identical manifests.
void write_manifest(const std::filesystem::path& out_dir,
                    const std::string& tool_version);

}  // namespace embaudit
