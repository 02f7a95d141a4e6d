#pragma once

#include <filesystem>
#include <vector>

#include "embaudit/invariance.hpp"
#include "embaudit/types.hpp"

namespace embaudit {

enum class FeatureFormat { csv, emat };

// Infers csv/emat from the file extension; throws on anything else.
FeatureFormat feature_format_from_path(const std::filesystem::path& path);

// Feature CSV: header `item_id,f0,f1,...`; decimal floats.
// EMAT binary: magic "EMAT", u32 version=1, u64 rows, u64 cols,
// rows*cols little-endian float32 row-major, then per-row u32
// length-prefixed UTF-8 item ids. Write-then-read is bit-exact.
FeatureMatrix load_features(const std::filesystem::path& path, FeatureFormat format);
void save_features(const FeatureMatrix& fm, const std::filesystem::path& path,
                   FeatureFormat format);

// Metadata CSV: header
// `item_id,subject_id,media_type,yaw_deg,pitch_deg,roll_deg,template_id`;
// empty cell = missing; media_type in {still, video}.
std::vector<MetadataRecord> load_metadata(const std::filesystem::path& path);
void save_metadata(const std::vector<MetadataRecord>& records,
                   const std::filesystem::path& path);

// Joins features with metadata on item_id. Retained items are the id
// intersection with every `required` field present, in feature-row order.
// Every excluded item lands in the dropped ledger with a reason:
// missing_features | missing_metadata | missing_field:<name>.
Dataset join(const FeatureMatrix& features, const std::vector<MetadataRecord>& records,
             const std::vector<Field>& required = {});

// Re-join of an already joined dataset; carries the existing ledger forward,
// so the operation is idempotent: join(join(ds)) == join(ds).
Dataset join(const Dataset& ds, const std::vector<Field>& required = {});

// Identities whose item counts in BOTH condition groups reach
// min_per_group, sorted by identity label. Items in neither group and
// items with missing subject ids are ignored.
std::vector<std::string> select_identities(const Dataset& ds, const ConditionSpec& condition,
                                           std::size_t min_per_group);

}  // namespace embaudit
