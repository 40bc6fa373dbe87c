#pragma once

#include "spinebench/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spinebench {

/// Stack of axis-aligned boxes, one per label, running from the top (highest
/// z) of the volume downwards.
struct PhantomSpec {
    /// File stem used by the synth command.
    std::string name = "phantom";
    std::vector<VertebraLabel> labels;
    std::array<std::int64_t, 3> vertebra_size_vox{10, 10, 10};
    std::int64_t gap_vox = 5;
    Spacing spacing{1.0, 1.0, 1.0};
    std::uint64_t seed = 0;
    /// Background border around the stack.
    std::int64_t margin_vox = 2;
    /// Fixed grid size; the stack is centered in x/y and starts `margin_vox` below the top.
    std::optional<Dims> dims;
    /// Extra offset of every box, in voxels (for building shifted predictions).
    std::array<std::int64_t, 3> offset_vox{0, 0, 0};
    std::int64_t max_voxels = std::int64_t{1} << 28;

    void validate() const;
    [[nodiscard]] static PhantomSpec from_json(const std::string& text);
    [[nodiscard]] std::string to_json() const;
};

struct Phantom {
    LabelVolume volume;
    CentroidSet centroids;
};

[[nodiscard]] Phantom make_phantom(const PhantomSpec& spec);

/// Adds seeded isotropic Gaussian noise (sigma per axis, mm) to every centroid.
[[nodiscard]] CentroidSet perturb_centroids(const CentroidSet& centroids, double sigma_mm, std::uint64_t seed);

enum class Endianness { little, big };

struct NiftiWriteOptions {
    /// 2, 4, 8, 16, 64, 256, 512 or 768.
    std::int16_t datatype = 4;
    Endianness endianness = Endianness::little;
    bool gzip = false;
    /// Applied as stored = (code - scl_inter) / scl_slope.
    float scl_slope = 0.0f;
    float scl_inter = 0.0f;
};

/// Test/fixture NIfTI-1 writer: single-file, sform-coded.
[[nodiscard]] std::vector<std::uint8_t> encode_nifti(const LabelVolume& volume, const NiftiWriteOptions& options = {});
void write_nifti(const LabelVolume& volume, const std::filesystem::path& path, const NiftiWriteOptions& options = {});

}  // namespace spinebench
