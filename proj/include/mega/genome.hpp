#pragma once

#include <cstdint>
#include <vector>

#include "mega/model.hpp"

namespace mega {

/// Shape of one dense layer inside a flat genome: a rows x cols weight block
/// followed by a cols-long bias block.
struct LayerShape {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    bool operator==(const LayerShape&) const = default;
};

/// Ordered layer shapes defining the bijection between layered parameters and
/// the flat vector. Two genomes are compatible iff their manifests are equal.
struct ShapeManifest {
    std::vector<LayerShape> layers;

    std::size_t total_len() const;
    static ShapeManifest of(const ModelSpec& spec);

    bool operator==(const ShapeManifest&) const = default;
};

/// Flat parameter vector plus its manifest; the unit the GA evolves.
struct Genome {
    std::vector<double> values;
    ShapeManifest manifest;

    bool operator==(const Genome&) const = default;
};

/// Round to the nearest 32-bit float value (the checkpoint precision). GA
/// operators quantize blended coordinates with this so evolved genomes
/// survive checkpoint round-trips bitwise.
inline double round_to_f32(double v) {
    return static_cast<double>(static_cast<float>(v));
}

/// Layer-major flattening: per layer, the weight matrix row-major, then the
/// bias vector. Lossless inverse of unflatten.
Genome flatten(const LayeredParams& params);

/// Inverse of flatten. Throws ShapeError if the value count does not match
/// the manifest.
LayeredParams unflatten(const Genome& genome);

/// True iff the manifests are identical (same layer split, not just length).
bool compatible(const Genome& a, const Genome& b);

/// Reconstruct the MLP architecture a manifest encodes. Throws ShapeError if
/// consecutive layers do not chain (cols of layer l != rows of layer l+1).
ModelSpec spec_from_manifest(const ShapeManifest& manifest);

/// "[2x16 16x16 16x2]", for error messages.
std::string to_string(const ShapeManifest& manifest);

}  // namespace mega
