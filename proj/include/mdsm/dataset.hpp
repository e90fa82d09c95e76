#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "mdsm/rng.hpp"
#include "mdsm/tensor.hpp"

namespace mdsm {

enum class DatasetKind { Csv2d, IdxImages };

[[nodiscard]] DatasetKind parse_dataset_kind(std::string_view name);

// csv2d: one row per line, comma separated floats, every row the same width.
// idx-images: big-endian IDX with magic 2051 (0x00000803), dims [N,rows,cols],
// unsigned bytes scaled by 1/255 and flattened to [N, rows*cols].
// Throws FormatError on malformed or truncated input and UsageError when the
// file cannot be opened.
[[nodiscard]] Tensor load_dataset(const std::filesystem::path& path, DatasetKind kind);
[[nodiscard]] Tensor parse_csv(std::string_view text);
[[nodiscard]] Tensor parse_idx_images(std::span<const std::uint8_t> bytes);

// Writes rows as CSV with 17 significant digits, which round-trips doubles.
void write_csv(const std::filesystem::path& path, const Tensor& rows);

}  // namespace mdsm
