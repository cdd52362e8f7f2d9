#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "mega/matrix.hpp"

namespace mega {

/// Disjoint index sets into a Dataset. Empty vectors = partition not assigned.
struct Partition {
    std::vector<std::uint32_t> train;
    std::vector<std::uint32_t> val;
    std::vector<std::uint32_t> test;

    bool empty() const { return train.empty() && val.empty() && test.empty(); }
};

/// Feature matrix with integer class labels. Features are used as-is; the
/// synthetic generators emit already-standardized ranges.
struct Dataset {
    Matrix X;                      // n x d
    std::vector<std::int32_t> y;   // n labels in [0, num_classes)
    std::int32_t num_classes = 0;
    Partition partition;

    std::size_t size() const { return X.rows; }
    std::size_t dim() const { return X.cols; }
};

enum class SyntheticKind { TwoMoons, GaussianBlobs, ConcentricRings };

/// Parse "two_moons" | "gaussian_blobs" | "concentric_rings". Throws ConfigError.
SyntheticKind parse_synthetic_kind(std::string_view name);
std::string_view synthetic_kind_name(SyntheticKind kind);

/// Deterministic 2-D toy datasets. two_moons and gaussian_blobs emit 2
/// classes, concentric_rings 3; classes alternate sample-by-sample so class
/// counts are exactly balanced. Requires n >= 10, noise >= 0.
Dataset gen_synthetic(SyntheticKind kind, std::size_t n, double noise,
                      std::uint64_t seed);

/// Load a rectangular numeric CSV with a header row. Features are all
/// non-label columns in header order; labels must parse as non-negative
/// integers. num_classes = max label + 1. Errors carry the 1-based file line.
Dataset load_csv(const std::filesystem::path& path, std::string_view label_column);

/// Seeded uniform shuffle, then contiguous slices in train/val/test order.
/// Slice sizes are round(n * fraction); the training slice must be non-empty.
Dataset split(Dataset dataset, double val_fraction, double test_fraction,
              std::uint64_t seed);

/// Materialize the rows of an index set.
std::pair<Matrix, std::vector<std::int32_t>> subset(const Dataset& dataset,
                                                    std::span<const std::uint32_t> idx);

}  // namespace mega
