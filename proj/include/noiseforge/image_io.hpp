#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "noiseforge/image.hpp"

namespace noiseforge {

enum class ImageFormat { png, pgm };

/// Format from the file extension (.png or .pgm, case-insensitive).
/// Throws IoError for anything else.
ImageFormat format_for_path(const std::filesystem::path& path);

/// Decodes an 8-bit single-channel PNG or binary PGM (P5, maxval 255).
/// Colour, alpha, palette and 16-bit inputs are rejected with IoError.
QuantizedImage decode_image(std::span<const std::uint8_t> bytes);

/// Encoding is deterministic: no timestamps or other ambient metadata.
std::vector<std::uint8_t> encode_image(const QuantizedImage& img, ImageFormat format);

QuantizedImage read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const QuantizedImage& img);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes only when the on-disk bytes differ. Returns true if the file was
/// (re)written.
bool write_file_if_changed(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace noiseforge
