#pragma once

#include "spinebench/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace spinebench {

enum class CentroidSpace { world, voxel };

/// Reads a single-file NIfTI-1 label volume (".nii" or gzip ".nii.gz").
///
/// Spacing comes from pixdim[1..3]; the affine from the sform when
/// sform_code > 0, else the qform when qform_code > 0, else diag(pixdim).
/// Stored values are scaled by scl_slope/scl_inter and must round to valid
/// label codes.
[[nodiscard]] LabelVolume load_label_volume(const std::filesystem::path& path);

/// Parses an in-memory (already decompressed) NIfTI-1 image.
[[nodiscard]] LabelVolume parse_nifti(std::span<const std::uint8_t> bytes);

/// Reads a whole file, inflating it if it starts with the gzip magic.
[[nodiscard]] std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path);

/// Loads a JSON array of {"label", "X", "Y", "Z"} records. Elements without a
/// label (orientation metadata) are skipped. Voxel-space coordinates are
/// mapped through the affine of `volume`, which is then mandatory.
[[nodiscard]] CentroidSet load_centroids(const std::filesystem::path& path, CentroidSpace space,
                                         const LabelVolume* volume = nullptr);
[[nodiscard]] CentroidSet parse_centroids(std::string_view json_text, CentroidSpace space,
                                          const LabelVolume* volume = nullptr);

/// Serializes a centroid set in the same array-of-records form.
[[nodiscard]] std::string centroids_to_json(const CentroidSet& set);

/// Throws Error(grid_mismatch) unless dims agree and spacing agrees within 1e-4 mm.
void require_same_grid(const LabelVolume& a, const LabelVolume& b);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace spinebench
