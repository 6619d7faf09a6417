#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trapscan/matrix.hpp"

// Checkpoint container: a UTF-8 JSON manifest next to one raw little-endian
// binary blob holding the concatenated row-major tensors. f32 tensors are
// widened to f64 on load; all downstream math runs in f64.

namespace trapscan {

enum class Dtype { F32, F64 };

inline std::size_t dtype_size(Dtype d) { return d == Dtype::F32 ? 4 : 8; }

struct LayerEntry {
    std::string layer_id;
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    Dtype dtype = Dtype::F64;
    std::uint64_t byte_offset = 0;
    std::uint64_t byte_length = 0;
};

struct CheckpointManifest {
    std::string model_name;
    std::int64_t step = 0;
    std::string data_file;  // relative to the manifest's directory
    std::vector<LayerEntry> layers;
    std::map<std::string, std::string> metadata;
};

struct Checkpoint {
    CheckpointManifest manifest;
    std::vector<WeightMatrix> layers;  // manifest order, all f64, all finite
};

Checkpoint load_checkpoint(const std::string& manifest_path);

// Writes <path>.json and <path>.bin; returns the manifest that was written.
CheckpointManifest save_checkpoint(const std::vector<WeightMatrix>& layers,
                                   const std::map<std::string, std::string>& metadata,
                                   const std::string& path,
                                   const std::string& model_name = "model",
                                   std::int64_t step = 0);

}  // namespace trapscan
