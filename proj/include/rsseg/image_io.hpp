#pragma once

#include "rsseg/core.hpp"

#include <cstdint>
#include <filesystem>

namespace rsseg {

// Binary netpbm: P5 (grey) and P6 (RGB), 8 or 16 bit. Lossless, and small
// enough to read and write without an imaging dependency.

Image read_image(const std::filesystem::path& path);
/// 1-channel images are written as P5, 3-channel as P6; values are rounded and clamped to [0, 255].
void write_image(const std::filesystem::path& path, const Image& image);

void write_mask_pgm(const std::filesystem::path& path, const BinaryGrid& mask);
/// Any nonzero sample is a member pixel.
BinaryGrid read_mask_pgm(const std::filesystem::path& path);

void write_pgm16(const std::filesystem::path& path, const Grid<std::uint16_t>& g);
Grid<std::uint16_t> read_pgm16(const std::filesystem::path& path);

/// Saliency debug export: `<stem>.pgm` (16 bit, min..max mapped to 0..65535)
/// and `<stem>.json` with min, max and the quantisation step.
void export_saliency(const std::filesystem::path& stem, const MapGrid& map);
/// Inverse of export_saliency, exact to within one quantisation step.
MapGrid import_saliency(const std::filesystem::path& stem);

}  // namespace rsseg
