#pragma once

#include <filesystem>

#include "mega/errors.hpp"
#include "mega/genome.hpp"

namespace mega {

// Checkpoint binary format, little-endian:
//   magic "MEGA" | u32 version (=1) | u32 layer count |
//   per layer: u32 rows, u32 cols |
//   f32 x total_len (per layer: weights row-major, then bias) |
//   u32 CRC32 of all preceding bytes

struct CheckpointError : DataError {
    enum class Kind { BadMagic, BadVersion, LengthMismatch, BadCrc, NonFinite, Io };
    CheckpointError(Kind k, const std::string& msg) : DataError(msg), kind(k) {}
    Kind kind;
};

/// Write a genome as a checkpoint; values are stored as 32-bit floats. The
/// file appears atomically (temp file + rename), so failures leave no partial
/// checkpoint behind. Throws CheckpointError on non-finite values or I/O.
void save_checkpoint(const Genome& genome, const std::filesystem::path& path);

/// Read and fully validate a checkpoint. Throws CheckpointError with a
/// distinct kind for bad magic, unsupported version, length mismatch
/// (truncation or trailing bytes), CRC failure, and non-finite values.
Genome load_checkpoint(const std::filesystem::path& path);

}  // namespace mega
