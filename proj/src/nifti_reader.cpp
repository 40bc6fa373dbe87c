#include "spinebench/error.hpp"
#include "spinebench/volume_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace spinebench {

namespace {

constexpr std::int32_t nifti1_header_size = 348;
constexpr double integral_tolerance = 1e-6;

class HeaderReader {
public:
    HeaderReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <typename T>
    T get(std::size_t offset) const {
        std::array<std::uint8_t, sizeof(T)> raw{};
        std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
        if (swap_) std::reverse(raw.begin(), raw.end());
        T value;
        std::memcpy(&value, raw.data(), sizeof(T));
        return value;
    }

private:
    std::span<const std::uint8_t> bytes_;
    bool swap_;
};

std::size_t datatype_size(std::int16_t datatype) {
    switch (datatype) {
        case 2:    // uint8
        case 256:  // int8
            return 1;
        case 4:    // int16
        case 512:  // uint16
            return 2;
        case 8:    // int32
        case 16:   // float32
        case 768:  // uint32
            return 4;
        case 64:  // float64
            return 8;
        default:
            throw Error(ErrorCode::format, "unsupported NIfTI datatype code " + std::to_string(datatype));
    }
}

template <typename T>
double read_sample(const std::uint8_t* p, bool swap) {
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), p, sizeof(T));
    if (swap) std::reverse(raw.begin(), raw.end());
    T v;
    std::memcpy(&v, raw.data(), sizeof(T));
    return static_cast<double>(v);
}

double read_voxel(std::int16_t datatype, const std::uint8_t* p, bool swap) {
    switch (datatype) {
        case 2: return read_sample<std::uint8_t>(p, false);
        case 256: return read_sample<std::int8_t>(p, false);
        case 4: return read_sample<std::int16_t>(p, swap);
        case 512: return read_sample<std::uint16_t>(p, swap);
        case 8: return read_sample<std::int32_t>(p, swap);
        case 768: return read_sample<std::uint32_t>(p, swap);
        case 16: return read_sample<float>(p, swap);
        case 64: return read_sample<double>(p, swap);
        default: return 0.0;  // rejected earlier by datatype_size
    }
}

Affine quaternion_affine(const HeaderReader& h, const Spacing& spacing, double qfac) {
    const double b = h.get<float>(256);
    const double c = h.get<float>(260);
    const double d = h.get<float>(264);
    double a = 1.0 - (b * b + c * c + d * d);
    a = a < 1e-7 ? 0.0 : std::sqrt(a);

    Affine m{};
    const double r[3][3] = {
        {a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)},
        {2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)},
        {2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b},
    };
    const double scale[3] = {spacing[0], spacing[1], qfac * spacing[2]};
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col) m[row][col] = r[row][col] * scale[col];
    m[0][3] = h.get<float>(268);
    m[1][3] = h.get<float>(272);
    m[2][3] = h.get<float>(276);
    m[3] = {0.0, 0.0, 0.0, 1.0};
    return m;
}

}  // namespace

std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (raw.size() < 2 || raw[0] != 0x1f || raw[1] != 0x8b) return raw;

    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error(ErrorCode::io, "zlib initialisation failed");
    std::vector<std::uint8_t> out;
    out.resize(raw.size() * 4 + 4096);
    zs.next_in = raw.data();
    zs.avail_in = static_cast<uInt>(raw.size());
    int rc = Z_OK;
    while (true) {
        if (zs.total_out == out.size()) out.resize(out.size() * 2);
        zs.next_out = out.data() + zs.total_out;
        zs.avail_out = static_cast<uInt>(out.size() - zs.total_out);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc == Z_STREAM_END) {
            // concatenated gzip members
            if (zs.avail_in > 0 && inflateReset(&zs) == Z_OK) continue;
            break;
        }
        if (rc != Z_OK && rc != Z_BUF_ERROR) break;
        if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;
    }
    const auto produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error(ErrorCode::format, "corrupt gzip stream in " + path.string());
    out.resize(produced);
    return out;
}

LabelVolume parse_nifti(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < nifti1_header_size)
        throw Error(ErrorCode::format, "file too short for a NIfTI-1 header");

    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, bytes.data(), 4);
    bool swap;
    if (sizeof_hdr == nifti1_header_size)
        swap = false;
    else if (static_cast<std::int32_t>(__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr))) == nifti1_header_size)
        swap = true;
    else
        throw Error(ErrorCode::format, "corrupt NIfTI-1 header (sizeof_hdr != 348)");
    const HeaderReader h(bytes, swap);

    const char* magic = reinterpret_cast<const char*>(bytes.data() + 344);
    if (std::memcmp(magic, "ni1\0", 4) == 0)
        throw Error(ErrorCode::format, "two-file NIfTI (.hdr/.img) is not supported");
    if (std::memcmp(magic, "n+1\0", 4) != 0) throw Error(ErrorCode::format, "bad NIfTI-1 magic");

    const auto ndim = h.get<std::int16_t>(40);
    if (ndim < 1 || ndim > 7) throw Error(ErrorCode::format, "invalid dim[0] " + std::to_string(ndim));
    std::vector<std::int64_t> shape;
    for (int d = 1; d <= ndim; ++d) shape.push_back(h.get<std::int16_t>(40 + 2 * d));
    while (shape.size() > 3 && shape.back() == 1) shape.pop_back();
    if (shape.size() != 3)
        throw Error(ErrorCode::format, "label volume must be 3D, got " + std::to_string(shape.size()) + "D");
    const Dims dims{shape[0], shape[1], shape[2]};
    for (auto v : dims)
        if (v <= 0) throw Error(ErrorCode::format, "non-positive NIfTI dimension");

    const auto datatype = h.get<std::int16_t>(70);
    const std::size_t elem = datatype_size(datatype);

    Spacing spacing{};
    for (int d = 0; d < 3; ++d) spacing[d] = h.get<float>(76 + 4 * (d + 1));
    for (auto s : spacing)
        if (!(s > 0.0)) throw Error(ErrorCode::format, "pixdim[1..3] must be positive");
    const double qfac = h.get<float>(76) < 0.0f ? -1.0 : 1.0;

    Affine affine;
    if (h.get<std::int16_t>(254) > 0) {
        for (int row = 0; row < 3; ++row)
            for (int col = 0; col < 4; ++col) affine[row][col] = h.get<float>(280 + 16 * row + 4 * col);
        affine[3] = {0.0, 0.0, 0.0, 1.0};
    } else if (h.get<std::int16_t>(252) > 0) {
        affine = quaternion_affine(h, spacing, qfac);
    } else {
        affine = diagonal_affine(spacing);
    }

    const auto vox_offset = static_cast<std::size_t>(h.get<float>(108));
    if (vox_offset < nifti1_header_size) throw Error(ErrorCode::format, "vox_offset inside header");
    const std::size_t nvox = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
    if (bytes.size() < vox_offset + nvox * elem)
        throw Error(ErrorCode::format, "NIfTI data shorter than header dimensions");

    double slope = h.get<float>(112);
    double inter = h.get<float>(116);
    if (slope == 0.0 || !std::isfinite(slope)) {
        slope = 1.0;
        inter = 0.0;
    }
    if (!std::isfinite(inter)) inter = 0.0;
    const bool identity_scale = slope == 1.0 && inter == 0.0;

    std::vector<std::uint8_t> voxels(nvox);
    const std::uint8_t* data = bytes.data() + vox_offset;
    for (std::size_t n = 0; n < nvox; ++n) {
        double v = read_voxel(datatype, data + n * elem, swap);
        if (!identity_scale) v = v * slope + inter;
        const double r = std::round(v);
        if (!(std::abs(r - v) <= integral_tolerance) || r < 0.0 || r > VertebraLabel::max_code ||
            (r != 0.0 && !VertebraLabel::is_valid(static_cast<int>(r)))) {
            const auto idx = static_cast<std::int64_t>(n);
            throw Error(ErrorCode::invalid_label,
                        "invalid label value " + std::to_string(v) + " at voxel (" +
                            std::to_string(idx % dims[0]) + "," + std::to_string((idx / dims[0]) % dims[1]) +
                            "," + std::to_string(idx / (dims[0] * dims[1])) + ")");
        }
        voxels[n] = static_cast<std::uint8_t>(r);
    }
    return LabelVolume(dims, spacing, affine, std::move(voxels));
}

LabelVolume load_label_volume(const std::filesystem::path& path) {
    const auto bytes = read_maybe_gzip(path);
    try {
        return parse_nifti(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void require_same_grid(const LabelVolume& a, const LabelVolume& b) {
    if (a.dims() != b.dims())
        throw Error(ErrorCode::grid_mismatch, "volume dimensions differ");
    for (int d = 0; d < 3; ++d)
        if (std::abs(a.spacing()[d] - b.spacing()[d]) > 1e-4)
            throw Error(ErrorCode::grid_mismatch, "voxel spacing differs");
}

}  // namespace spinebench
