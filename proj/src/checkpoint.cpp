#include "mega/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include <zlib.h>

namespace mega {

namespace {

constexpr char kMagic[4] = {'M', 'E', 'G', 'A'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
    buf.push_back(static_cast<unsigned char>(v & 0xff));
    buf.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    buf.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    buf.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
           (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint32_t crc_of(const std::vector<unsigned char>& buf, std::size_t len) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
                static_cast<uInt>(len)));
}

}  // namespace

void save_checkpoint(const Genome& genome, const std::filesystem::path& path) {
    if (genome.values.size() != genome.manifest.total_len()) {
        throw CheckpointError(CheckpointError::Kind::LengthMismatch,
                              "genome value count does not match its manifest");
    }
    std::vector<unsigned char> buf;
    buf.reserve(16 + 8 * genome.manifest.layers.size() + 4 * genome.values.size());
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<std::uint32_t>(genome.manifest.layers.size()));
    for (const auto& layer : genome.manifest.layers) {
        put_u32(buf, layer.rows);
        put_u32(buf, layer.cols);
    }
    for (double v : genome.values) {
        if (!std::isfinite(v)) {
            throw CheckpointError(CheckpointError::Kind::NonFinite,
                                  "genome contains a non-finite value");
        }
        put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    put_u32(buf, crc_of(buf, buf.size()));

    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw CheckpointError(CheckpointError::Kind::Io,
                                  "cannot open for writing: " + tmp);
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
        if (!out) {
            throw CheckpointError(CheckpointError::Kind::Io, "write failed: " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw CheckpointError(CheckpointError::Kind::Io,
                              "cannot move checkpoint into place: " + path.string());
    }
}

Genome load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError(CheckpointError::Kind::Io,
                              "cannot open checkpoint: " + path.string());
    }
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

    if (buf.size() < 12) {
        throw CheckpointError(CheckpointError::Kind::LengthMismatch,
                              "checkpoint shorter than its header: " + path.string());
    }
    if (std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw CheckpointError(CheckpointError::Kind::BadMagic,
                              "bad magic bytes in " + path.string());
    }
    const std::uint32_t version = get_u32(buf.data() + 4);
    if (version != kVersion) {
        throw CheckpointError(CheckpointError::Kind::BadVersion,
                              "unsupported checkpoint version " +
                                  std::to_string(version) + " in " + path.string());
    }
    const std::uint32_t layer_count = get_u32(buf.data() + 8);

    Genome g;
    std::size_t pos = 12;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        if (pos + 8 > buf.size()) {
            throw CheckpointError(CheckpointError::Kind::LengthMismatch,
                                  "checkpoint truncated in the layer table: " +
                                      path.string());
        }
        g.manifest.layers.push_back(
            {get_u32(buf.data() + pos), get_u32(buf.data() + pos + 4)});
        pos += 8;
    }
    const std::size_t total = g.manifest.total_len();
    const std::size_t expected = pos + 4 * total + 4;
    if (buf.size() != expected) {
        throw CheckpointError(
            CheckpointError::Kind::LengthMismatch,
            "checkpoint length " + std::to_string(buf.size()) + " != expected " +
                std::to_string(expected) + " for its manifest: " + path.string());
    }
    const std::uint32_t stored_crc = get_u32(buf.data() + buf.size() - 4);
    if (stored_crc != crc_of(buf, buf.size() - 4)) {
        throw CheckpointError(CheckpointError::Kind::BadCrc,
                              "CRC mismatch in " + path.string());
    }

    g.values.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        const float f = std::bit_cast<float>(get_u32(buf.data() + pos));
        pos += 4;
        if (!std::isfinite(f)) {
            throw CheckpointError(CheckpointError::Kind::NonFinite,
                                  "non-finite value in " + path.string());
        }
        g.values.push_back(static_cast<double>(f));
    }
    return g;
}

}  // namespace mega
