#include "mega/genome.hpp"

#include <string>

#include "mega/errors.hpp"

namespace mega {

std::size_t ShapeManifest::total_len() const {
    std::size_t len = 0;
    for (const auto& l : layers) {
        len += std::size_t(l.rows) * l.cols + l.cols;
    }
    return len;
}

ShapeManifest ShapeManifest::of(const ModelSpec& spec) {
    spec.validate();
    ShapeManifest m;
    for (std::size_t l = 1; l < spec.layer_widths.size(); ++l) {
        m.layers.push_back({spec.layer_widths[l - 1], spec.layer_widths[l]});
    }
    return m;
}

Genome flatten(const LayeredParams& params) {
    Genome g;
    for (const auto& layer : params.layers) {
        g.manifest.layers.push_back(
            {static_cast<std::uint32_t>(layer.weights.rows),
             static_cast<std::uint32_t>(layer.weights.cols)});
    }
    g.values.reserve(g.manifest.total_len());
    for (const auto& layer : params.layers) {
        g.values.insert(g.values.end(), layer.weights.data.begin(),
                        layer.weights.data.end());
        g.values.insert(g.values.end(), layer.bias.begin(), layer.bias.end());
    }
    return g;
}

LayeredParams unflatten(const Genome& genome) {
    if (genome.values.size() != genome.manifest.total_len()) {
        throw ShapeError("genome has " + std::to_string(genome.values.size()) +
                         " values but its manifest requires " +
                         std::to_string(genome.manifest.total_len()));
    }
    LayeredParams p;
    std::size_t pos = 0;
    for (const auto& shape : genome.manifest.layers) {
        LayeredParams::Layer layer;
        layer.weights = Matrix(shape.rows, shape.cols);
        std::copy(genome.values.begin() + pos,
                  genome.values.begin() + pos + std::size_t(shape.rows) * shape.cols,
                  layer.weights.data.begin());
        pos += std::size_t(shape.rows) * shape.cols;
        layer.bias.assign(genome.values.begin() + pos,
                          genome.values.begin() + pos + shape.cols);
        pos += shape.cols;
        p.layers.push_back(std::move(layer));
    }
    return p;
}

bool compatible(const Genome& a, const Genome& b) {
    return a.manifest == b.manifest;
}

std::string to_string(const ShapeManifest& manifest) {
    std::string s = "[";
    for (std::size_t i = 0; i < manifest.layers.size(); ++i) {
        if (i > 0) s += ' ';
        s += std::to_string(manifest.layers[i].rows) + "x" +
             std::to_string(manifest.layers[i].cols);
    }
    return s + "]";
}

ModelSpec spec_from_manifest(const ShapeManifest& manifest) {
    if (manifest.layers.empty()) {
        throw ShapeError("manifest has no layers");
    }
    ModelSpec spec;
    spec.layer_widths.push_back(manifest.layers.front().rows);
    for (std::size_t l = 0; l < manifest.layers.size(); ++l) {
        if (l > 0 && manifest.layers[l].rows != manifest.layers[l - 1].cols) {
            throw ShapeError("manifest layers do not chain into an MLP");
        }
        spec.layer_widths.push_back(manifest.layers[l].cols);
    }
    spec.validate();
    return spec;
}

}  // namespace mega
