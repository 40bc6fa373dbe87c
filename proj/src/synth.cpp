#include "spinebench/synth.hpp"

#include "spinebench/error.hpp"

#include "json.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>

namespace spinebench {

using nlohmann::json;

void PhantomSpec::validate() const {
    if (labels.empty()) throw Error(ErrorCode::invalid_argument, "phantom needs at least one label");
    for (std::size_t n = 1; n < labels.size(); ++n)
        if (labels[n - 1].anatomical_rank() >= labels[n].anatomical_rank())
            throw Error(ErrorCode::invalid_argument, "phantom labels must be in anatomical order");
    for (auto s : vertebra_size_vox)
        if (s <= 0) throw Error(ErrorCode::invalid_argument, "vertebra size must be positive");
    if (gap_vox <= 0) throw Error(ErrorCode::invalid_argument, "gap must be positive");
    if (margin_vox < 0) throw Error(ErrorCode::invalid_argument, "margin must be non-negative");
    for (auto s : spacing)
        if (!(s > 0.0)) throw Error(ErrorCode::invalid_argument, "spacing must be positive");
}

PhantomSpec PhantomSpec::from_json(const std::string& text) {
    PhantomSpec s;
    try {
        const auto doc = json::parse(text);
        s.name = doc.value("name", s.name);
        for (int code : doc.at("labels")) s.labels.emplace_back(code);
        if (doc.contains("vertebra_size_vox")) s.vertebra_size_vox = doc["vertebra_size_vox"].get<std::array<std::int64_t, 3>>();
        s.gap_vox = doc.value("gap_vox", s.gap_vox);
        if (doc.contains("spacing")) s.spacing = doc["spacing"].get<Spacing>();
        s.seed = doc.value("seed", s.seed);
        s.margin_vox = doc.value("margin_vox", s.margin_vox);
        if (doc.contains("dims") && !doc["dims"].is_null()) s.dims = doc["dims"].get<Dims>();
        if (doc.contains("offset_vox")) s.offset_vox = doc["offset_vox"].get<std::array<std::int64_t, 3>>();
        s.max_voxels = doc.value("max_voxels", s.max_voxels);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::format, std::string("invalid phantom spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::string PhantomSpec::to_json() const {
    json doc;
    doc["name"] = name;
    doc["labels"] = json::array();
    for (auto l : labels) doc["labels"].push_back(l.code());
    doc["vertebra_size_vox"] = vertebra_size_vox;
    doc["gap_vox"] = gap_vox;
    doc["spacing"] = spacing;
    doc["seed"] = seed;
    doc["margin_vox"] = margin_vox;
    doc["dims"] = dims ? json(*dims) : json(nullptr);
    doc["offset_vox"] = offset_vox;
    doc["max_voxels"] = max_voxels;
    return doc.dump(2);
}

Phantom make_phantom(const PhantomSpec& spec) {
    spec.validate();
    const auto [sx, sy, sz] = spec.vertebra_size_vox;
    const auto n = static_cast<std::int64_t>(spec.labels.size());
    const std::int64_t stack = n * sz + (n - 1) * spec.gap_vox;
    const std::int64_t m = spec.margin_vox;
    const Dims dims = spec.dims.value_or(Dims{sx + 2 * m, sy + 2 * m, stack + 2 * m});
    for (auto d : dims)
        if (d <= 0) throw Error(ErrorCode::invalid_argument, "phantom dimensions must be positive");
    const std::int64_t total = dims[0] * dims[1] * dims[2];
    if (total > spec.max_voxels)
        throw Error(ErrorCode::invalid_argument, "phantom of " + std::to_string(total) +
                                                     " voxels exceeds the budget of " +
                                                     std::to_string(spec.max_voxels));

    const Affine affine = diagonal_affine(spec.spacing);
    std::vector<std::uint8_t> voxels(static_cast<std::size_t>(total), 0);
    CentroidSet centroids;
    const std::int64_t i0 = (dims[0] - sx) / 2 + spec.offset_vox[0];
    const std::int64_t j0 = (dims[1] - sy) / 2 + spec.offset_vox[1];
    for (std::int64_t b = 0; b < n; ++b) {
        const std::int64_t k0 = dims[2] - m - (b + 1) * sz - b * spec.gap_vox + spec.offset_vox[2];
        if (i0 < 0 || j0 < 0 || k0 < 0 || i0 + sx > dims[0] || j0 + sy > dims[1] || k0 + sz > dims[2])
            throw Error(ErrorCode::invalid_argument, "phantom boxes do not fit the grid");
        const auto code = static_cast<std::uint8_t>(spec.labels[static_cast<std::size_t>(b)].code());
        for (std::int64_t k = k0; k < k0 + sz; ++k)
            for (std::int64_t j = j0; j < j0 + sy; ++j) {
                auto* row = voxels.data() + static_cast<std::size_t>(i0 + dims[0] * (j + dims[1] * k));
                std::fill(row, row + sx, code);
            }
        centroids.insert(spec.labels[static_cast<std::size_t>(b)],
                         apply_affine(affine, static_cast<double>(i0) + static_cast<double>(sx - 1) / 2.0,
                                      static_cast<double>(j0) + static_cast<double>(sy - 1) / 2.0,
                                      static_cast<double>(k0) + static_cast<double>(sz - 1) / 2.0));
    }
    return {LabelVolume(dims, spec.spacing, affine, std::move(voxels)), std::move(centroids)};
}

CentroidSet perturb_centroids(const CentroidSet& centroids, double sigma_mm, std::uint64_t seed) {
    if (!(sigma_mm >= 0.0)) throw Error(ErrorCode::invalid_argument, "sigma must be non-negative");
    if (sigma_mm == 0.0) return centroids;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma_mm);
    CentroidSet out;
    for (const auto& [label, p] : centroids.entries()) {
        const double dx = noise(rng), dy = noise(rng), dz = noise(rng);
        out.insert(label, {p.x + dx, p.y + dy, p.z + dz});
    }
    return out;
}

namespace {

class ByteWriter {
public:
    ByteWriter(std::vector<std::uint8_t>& buf, bool big_endian) : buf_(buf), big_(big_endian) {}

    template <typename T>
    void put(std::size_t offset, T value) {
        std::array<std::uint8_t, sizeof(T)> raw{};
        std::memcpy(raw.data(), &value, sizeof(T));
        if (big_) std::reverse(raw.begin(), raw.end());
        std::memcpy(buf_.data() + offset, raw.data(), sizeof(T));
    }

private:
    std::vector<std::uint8_t>& buf_;
    bool big_;
};

std::int16_t bitpix_of(std::int16_t datatype) {
    switch (datatype) {
        case 2: case 256: return 8;
        case 4: case 512: return 16;
        case 8: case 16: case 768: return 32;
        case 64: return 64;
        default: throw Error(ErrorCode::invalid_argument, "unsupported datatype " + std::to_string(datatype));
    }
}

std::vector<std::uint8_t> gzip_bytes(const std::vector<std::uint8_t>& raw) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_BEST_SPEED, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error(ErrorCode::io, "zlib initialisation failed");
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(raw.size())));
    zs.next_in = const_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error(ErrorCode::io, "gzip compression failed");
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_nifti(const LabelVolume& volume, const NiftiWriteOptions& options) {
    const std::int16_t bitpix = bitpix_of(options.datatype);
    const std::size_t elem = static_cast<std::size_t>(bitpix / 8);
    constexpr std::size_t vox_offset = 352;
    std::vector<std::uint8_t> buf(vox_offset + volume.voxel_count() * elem, 0);
    ByteWriter w(buf, options.endianness == Endianness::big);

    w.put<std::int32_t>(0, 348);
    w.put<std::int16_t>(40, 3);
    for (int d = 0; d < 3; ++d) w.put<std::int16_t>(42 + 2 * d, static_cast<std::int16_t>(volume.dims()[d]));
    for (int d = 3; d < 7; ++d) w.put<std::int16_t>(42 + 2 * d, 1);
    w.put<std::int16_t>(70, options.datatype);
    w.put<std::int16_t>(72, bitpix);
    w.put<float>(76, 1.0f);
    for (int d = 0; d < 3; ++d) w.put<float>(80 + 4 * d, static_cast<float>(volume.spacing()[d]));
    w.put<float>(108, static_cast<float>(vox_offset));
    w.put<float>(112, options.scl_slope);
    w.put<float>(116, options.scl_inter);
    w.put<std::int16_t>(252, 0);
    w.put<std::int16_t>(254, 1);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c)
            w.put<float>(280 + 16 * r + 4 * c, static_cast<float>(volume.affine()[r][c]));
    std::memcpy(buf.data() + 344, "n+1\0", 4);

    const bool scaled = options.scl_slope != 0.0f;
    const auto vox = volume.voxels();
    for (std::size_t n = 0; n < vox.size(); ++n) {
        const double stored = scaled ? (vox[n] - static_cast<double>(options.scl_inter)) / options.scl_slope
                                     : static_cast<double>(vox[n]);
        const std::size_t at = vox_offset + n * elem;
        switch (options.datatype) {
            case 2: w.put<std::uint8_t>(at, static_cast<std::uint8_t>(stored)); break;
            case 256: w.put<std::int8_t>(at, static_cast<std::int8_t>(stored)); break;
            case 4: w.put<std::int16_t>(at, static_cast<std::int16_t>(stored)); break;
            case 512: w.put<std::uint16_t>(at, static_cast<std::uint16_t>(stored)); break;
            case 8: w.put<std::int32_t>(at, static_cast<std::int32_t>(stored)); break;
            case 768: w.put<std::uint32_t>(at, static_cast<std::uint32_t>(stored)); break;
            case 16: w.put<float>(at, static_cast<float>(stored)); break;
            case 64: w.put<double>(at, stored); break;
        }
    }
    return options.gzip ? gzip_bytes(buf) : buf;
}

void write_nifti(const LabelVolume& volume, const std::filesystem::path& path, const NiftiWriteOptions& options) {
    const auto bytes = encode_nifti(volume, options);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

}  // namespace spinebench
