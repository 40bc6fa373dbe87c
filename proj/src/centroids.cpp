#include "spinebench/error.hpp"
#include "spinebench/volume_io.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace spinebench {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

CentroidSet parse_centroids(std::string_view json_text, CentroidSpace space, const LabelVolume* volume) {
    if (space == CentroidSpace::voxel && volume == nullptr)
        throw Error(ErrorCode::invalid_argument, "voxel-space centroids need a reference volume");

    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::format, std::string("centroid file is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorCode::format, "centroid file must be a JSON array");

    CentroidSet out;
    for (const auto& element : doc) {
        if (!element.is_object() || !element.contains("label")) continue;
        const auto& label = element["label"];
        if (!label.is_number_integer())
            throw Error(ErrorCode::format, "centroid label must be an integer");
        const VertebraLabel vertebra(label.get<int>());

        Point3 p;
        for (auto [key, dst] : {std::pair{"X", &p.x}, std::pair{"Y", &p.y}, std::pair{"Z", &p.z}}) {
            if (!element.contains(key) || !element[key].is_number())
                throw Error(ErrorCode::format, "centroid " + vertebra.name() + " lacks numeric " + key);
            *dst = element[key].get<double>();
        }
        if (!p.finite()) throw Error(ErrorCode::format, "non-finite coordinate for " + vertebra.name());
        if (space == CentroidSpace::voxel) p = apply_affine(volume->affine(), p.x, p.y, p.z);
        out.insert(vertebra, p);
    }
    return out;
}

CentroidSet load_centroids(const std::filesystem::path& path, CentroidSpace space, const LabelVolume* volume) {
    try {
        return parse_centroids(read_text_file(path), space, volume);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::io) throw;
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::string centroids_to_json(const CentroidSet& set) {
    json doc = json::array();
    for (const auto& [label, p] : set.entries())
        doc.push_back({{"label", label.code()}, {"X", p.x}, {"Y", p.y}, {"Z", p.z}});
    return doc.dump(2) + "\n";
}

}  // namespace spinebench
