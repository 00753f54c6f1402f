#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "raindiff/errors.hpp"
#include "raindiff/tensor.hpp"

namespace raindiff {

// 2-D grid of 32-bit floats, row-major. Precipitation fields are mm/day and
// non-negative; topography fields are elevation in meters.
struct Field {
    int height = 0;
    int width = 0;
    std::vector<float> values;

    Field() = default;
    Field(int h, int w) : height(h), width(w), values(static_cast<size_t>(h) * w, 0.0f) {}

    float& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return values.size(); }
};

using PrecipField = Field;
using TopoField = Field;

// High/low-resolution training pair plus the elevation channel; lr dims are
// exactly hr dims / 8.
struct SamplePair {
    PrecipField hr;
    PrecipField lr;
    TopoField topo;
    std::string id;
};

struct ManifestEntry {
    std::string id;
    std::string split;  // "train" or "eval"
    std::string hr_path;
    std::string topo_path;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    uint64_t seed = 0;
};

// Binary container: "PFLD" magic, u32 version (=1), u32 height, u32 width,
// float32 payload, all little-endian.
void save_field(const Field& field, const std::string& path);
Field load_field(const std::string& path);

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// 8x reduction as three 2x bilinear halvings (equals an exact 8x8 block
// average). Dims must be divisible by 8.
Field downsample8x(const Field& hr);

// Builds the low-resolution counterpart by 8x bilinear downsampling,
// clamped at zero. hr dims must be divisible by 8 and match topo dims.
SamplePair make_pair(const PrecipField& hr, const TopoField& topo, std::string id = {});

// Deterministic synthetic dataset: one shared topography of Gaussian bumps
// and per-sample log-space precipitation fields correlated with it. Writes
// <out_dir>/topo.pfld, <out_dir>/<id>.pfld and <out_dir>/manifest.tsv.
DatasetManifest gen_synthetic_dataset(uint64_t seed, int train_count, int eval_count, int size,
                                      const std::string& out_dir);

// 8-bit binary PGM (P5), value = round-half-up of 255*min(v/vmax, 1).
void export_pgm(const Field& field, const std::string& path, float vmax);

// Loads an entry's fields and derives the pair.
SamplePair load_pair(const ManifestEntry& entry);

}  // namespace raindiff
