#include "mega/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "mega/errors.hpp"
#include "mega/rng.hpp"

namespace mega {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string_view trimmed(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

double parse_cell(std::string_view cell, std::size_t line_no, std::size_t col) {
    cell = trimmed(cell);
    double value = 0.0;
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw DataError("line " + std::to_string(line_no) + ", column " +
                        std::to_string(col + 1) + ": not a number: '" +
                        std::string(cell) + "'");
    }
    return value;
}

}  // namespace

SyntheticKind parse_synthetic_kind(std::string_view name) {
    if (name == "two_moons") return SyntheticKind::TwoMoons;
    if (name == "gaussian_blobs") return SyntheticKind::GaussianBlobs;
    if (name == "concentric_rings") return SyntheticKind::ConcentricRings;
    throw ConfigError("unknown dataset kind: '" + std::string(name) +
                      "' (expected two_moons, gaussian_blobs, or concentric_rings)");
}

std::string_view synthetic_kind_name(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::TwoMoons: return "two_moons";
        case SyntheticKind::GaussianBlobs: return "gaussian_blobs";
        case SyntheticKind::ConcentricRings: return "concentric_rings";
    }
    return "?";
}

Dataset gen_synthetic(SyntheticKind kind, std::size_t n, double noise,
                      std::uint64_t seed) {
    if (n < 10) throw ConfigError("synthetic dataset needs n >= 10");
    if (noise < 0.0) throw ConfigError("noise must be >= 0");

    Dataset ds;
    ds.num_classes = (kind == SyntheticKind::ConcentricRings) ? 3 : 2;
    ds.X = Matrix(n, 2);
    ds.y.resize(n);

    Rng rng(seed_stream(seed, "synthetic"));
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t cls =
            static_cast<std::int32_t>(i % static_cast<std::size_t>(ds.num_classes));
        double x0 = 0.0, x1 = 0.0;
        switch (kind) {
            case SyntheticKind::TwoMoons: {
                const double t = rng.uniform() * kPi;
                if (cls == 0) {
                    x0 = std::cos(t);
                    x1 = std::sin(t);
                } else {
                    x0 = 1.0 - std::cos(t);
                    x1 = 0.5 - std::sin(t);
                }
                break;
            }
            case SyntheticKind::GaussianBlobs: {
                x0 = (cls == 0) ? -2.0 : 2.0;
                x1 = 0.0;
                break;
            }
            case SyntheticKind::ConcentricRings: {
                const double angle = rng.uniform() * 2.0 * kPi;
                const double radius = 1.0 + cls;
                x0 = radius * std::cos(angle);
                x1 = radius * std::sin(angle);
                break;
            }
        }
        x0 += noise * rng.gaussian();
        x1 += noise * rng.gaussian();
        ds.X(i, 0) = x0;
        ds.X(i, 1) = x1;
        ds.y[i] = cls;
    }
    return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::string_view label_column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path.string());

    const auto header = split_line(line);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trimmed(header[i]) == label_column) {
            label_idx = i;
            break;
        }
    }
    if (label_idx == header.size()) {
        throw DataError("label column '" + std::string(label_column) +
                        "' not found in header (is the header row missing?)");
    }
    const std::size_t n_features = header.size() - 1;
    if (n_features == 0) throw DataError("CSV has no feature columns");

    std::vector<double> features;
    std::vector<std::int32_t> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const double v = parse_cell(cells[i], line_no, i);
            if (i == label_idx) {
                if (v < 0.0 || v != std::floor(v) || v > 2147483647.0) {
                    throw DataError("line " + std::to_string(line_no) +
                                    ": label must be a non-negative integer, got '" +
                                    std::string(trimmed(cells[i])) + "'");
                }
                labels.push_back(static_cast<std::int32_t>(v));
            } else {
                features.push_back(v);
            }
        }
    }
    if (labels.empty()) throw DataError("CSV has no data rows: " + path.string());

    Dataset ds;
    ds.X = Matrix(labels.size(), n_features);
    ds.X.data = std::move(features);
    ds.y = std::move(labels);
    ds.num_classes = *std::max_element(ds.y.begin(), ds.y.end()) + 1;
    return ds;
}

Dataset split(Dataset dataset, double val_fraction, double test_fraction,
              std::uint64_t seed) {
    if (val_fraction < 0.0 || val_fraction >= 1.0 || test_fraction < 0.0 ||
        test_fraction >= 1.0 || val_fraction + test_fraction >= 1.0) {
        throw ConfigError("split fractions must lie in [0,1) and sum below 1");
    }
    const std::size_t n = dataset.size();
    const auto n_val = static_cast<std::size_t>(std::llround(double(n) * val_fraction));
    const auto n_test =
        static_cast<std::size_t>(std::llround(double(n) * test_fraction));
    if (n_val + n_test >= n) {
        throw ConfigError("split leaves no training samples");
    }
    const std::size_t n_train = n - n_val - n_test;

    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    Rng rng(seed_stream(seed, "split"));
    shuffle(rng, idx);

    dataset.partition.train.assign(idx.begin(), idx.begin() + n_train);
    dataset.partition.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    dataset.partition.test.assign(idx.begin() + n_train + n_val, idx.end());
    return dataset;
}

std::pair<Matrix, std::vector<std::int32_t>> subset(
    const Dataset& dataset, std::span<const std::uint32_t> idx) {
    Matrix X(idx.size(), dataset.dim());
    std::vector<std::int32_t> y(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto src = dataset.X.row(idx[i]);
        std::copy(src.begin(), src.end(), X.row(i).begin());
        y[i] = dataset.y[idx[i]];
    }
    return {std::move(X), std::move(y)};
}

}  // namespace mega
