#include "trapscan/tensor_store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace trapscan {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

Dtype parse_dtype(const std::string& s) {
    if (s == "f32") return Dtype::F32;
    if (s == "f64") return Dtype::F64;
    raise(ErrorCode::MalformedManifest, "unknown dtype '" + s + "'");
}

const char* dtype_name(Dtype d) { return d == Dtype::F32 ? "f32" : "f64"; }

// Raw tensors are little-endian on disk regardless of host order.
static_assert(std::endian::native == std::endian::little,
              "big-endian hosts need byte swapping in the tensor store");

std::vector<double> read_layer(std::ifstream& file, const LayerEntry& entry,
                               std::uint64_t file_size) {
    const std::uint64_t elems =
        static_cast<std::uint64_t>(entry.rows) * static_cast<std::uint64_t>(entry.cols);
    const std::uint64_t expected = elems * dtype_size(entry.dtype);
    if (entry.byte_length != expected)
        raise(ErrorCode::TensorBounds,
              "layer '" + entry.layer_id + "' declares " + std::to_string(entry.byte_length) +
                  " bytes but shape requires " + std::to_string(expected));
    if (entry.byte_offset + entry.byte_length > file_size ||
        entry.byte_offset + entry.byte_length < entry.byte_offset)
        raise(ErrorCode::TensorBounds,
              "layer '" + entry.layer_id + "' byte range exceeds data file");

    file.seekg(static_cast<std::streamoff>(entry.byte_offset));
    std::vector<double> values(elems);
    if (entry.dtype == Dtype::F64) {
        file.read(reinterpret_cast<char*>(values.data()),
                  static_cast<std::streamsize>(entry.byte_length));
    } else {
        std::vector<float> raw(elems);
        file.read(reinterpret_cast<char*>(raw.data()),
                  static_cast<std::streamsize>(entry.byte_length));
        for (std::uint64_t i = 0; i < elems; ++i)
            values[i] = static_cast<double>(raw[i]);  // exact widening
    }
    if (!file)
        raise(ErrorCode::Io, "short read on layer '" + entry.layer_id + "'");
    return values;
}

}  // namespace

Checkpoint load_checkpoint(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) raise(ErrorCode::Io, "cannot open manifest '" + manifest_path + "'");

    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::MalformedManifest,
              "manifest '" + manifest_path + "' is not valid JSON: " + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.manifest.model_name = doc.at("model_name").get<std::string>();
        ckpt.manifest.step = doc.at("step").get<std::int64_t>();
        ckpt.manifest.data_file = doc.at("data_file").get<std::string>();
        for (const auto& layer : doc.at("layers")) {
            LayerEntry entry;
            entry.layer_id = layer.at("layer_id").get<std::string>();
            entry.rows = layer.at("rows").get<std::int64_t>();
            entry.cols = layer.at("cols").get<std::int64_t>();
            entry.dtype = parse_dtype(layer.at("dtype").get<std::string>());
            entry.byte_offset = layer.at("byte_offset").get<std::uint64_t>();
            entry.byte_length = layer.at("byte_length").get<std::uint64_t>();
            if (entry.rows < 1 || entry.cols < 1)
                raise(ErrorCode::MalformedManifest,
                      "layer '" + entry.layer_id + "' has non-positive shape");
            ckpt.manifest.layers.push_back(std::move(entry));
        }
        if (doc.contains("metadata"))
            for (const auto& [key, value] : doc.at("metadata").items())
                ckpt.manifest.metadata[key] = value.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::MalformedManifest,
              "manifest '" + manifest_path + "' missing or mistyped field: " + e.what());
    }

    // Byte ranges must not overlap.
    std::vector<const LayerEntry*> by_offset;
    for (const auto& entry : ckpt.manifest.layers) by_offset.push_back(&entry);
    std::sort(by_offset.begin(), by_offset.end(),
              [](const LayerEntry* a, const LayerEntry* b) { return a->byte_offset < b->byte_offset; });
    for (std::size_t i = 1; i < by_offset.size(); ++i) {
        if (by_offset[i - 1]->byte_offset + by_offset[i - 1]->byte_length >
            by_offset[i]->byte_offset)
            raise(ErrorCode::MalformedManifest,
                  "layers '" + by_offset[i - 1]->layer_id + "' and '" +
                      by_offset[i]->layer_id + "' have overlapping byte ranges");
    }

    const fs::path data_path = fs::path(manifest_path).parent_path() / ckpt.manifest.data_file;
    std::ifstream data(data_path, std::ios::binary);
    if (!data) raise(ErrorCode::Io, "cannot open data file '" + data_path.string() + "'");
    const std::uint64_t file_size = fs::file_size(data_path);

    for (const auto& entry : ckpt.manifest.layers) {
        WeightMatrix w(entry.layer_id, entry.rows, entry.cols,
                       read_layer(data, entry, file_size), manifest_path);
        w.validate_finite();
        ckpt.layers.push_back(std::move(w));
    }
    return ckpt;
}

CheckpointManifest save_checkpoint(const std::vector<WeightMatrix>& layers,
                                   const std::map<std::string, std::string>& metadata,
                                   const std::string& path, const std::string& model_name,
                                   std::int64_t step) {
    for (const auto& layer : layers) {
        layer.validate_shape();
        layer.validate_finite();
    }

    CheckpointManifest manifest;
    manifest.model_name = model_name;
    manifest.step = step;
    manifest.data_file = fs::path(path).filename().string() + ".bin";
    manifest.metadata = metadata;

    const std::string bin_path = path + ".bin";
    const std::string json_path = path + ".json";
    std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
    if (!bin) raise(ErrorCode::Io, "cannot write '" + bin_path + "'");

    std::uint64_t offset = 0;
    for (const auto& layer : layers) {
        LayerEntry entry;
        entry.layer_id = layer.layer_id;
        entry.rows = layer.rows;
        entry.cols = layer.cols;
        entry.dtype = Dtype::F64;
        entry.byte_offset = offset;
        entry.byte_length = layer.data.size() * sizeof(double);
        bin.write(reinterpret_cast<const char*>(layer.data.data()),
                  static_cast<std::streamsize>(entry.byte_length));
        offset += entry.byte_length;
        manifest.layers.push_back(std::move(entry));
    }
    bin.close();
    if (!bin) raise(ErrorCode::Io, "failed writing '" + bin_path + "'");

    Json doc;
    doc["model_name"] = manifest.model_name;
    doc["step"] = manifest.step;
    doc["data_file"] = manifest.data_file;
    doc["layers"] = Json::array();
    for (const auto& entry : manifest.layers) {
        Json layer;
        layer["layer_id"] = entry.layer_id;
        layer["rows"] = entry.rows;
        layer["cols"] = entry.cols;
        layer["dtype"] = dtype_name(entry.dtype);
        layer["byte_offset"] = entry.byte_offset;
        layer["byte_length"] = entry.byte_length;
        doc["layers"].push_back(std::move(layer));
    }
    doc["metadata"] = Json::object();
    for (const auto& [key, value] : manifest.metadata) doc["metadata"][key] = value;

    std::ofstream out(json_path, std::ios::trunc);
    if (!out) raise(ErrorCode::Io, "cannot write '" + json_path + "'");
    out << doc.dump(2) << "\n";
    if (!out) raise(ErrorCode::Io, "failed writing '" + json_path + "'");
    return manifest;
}

}  // namespace trapscan
