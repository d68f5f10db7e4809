#include "noiseforge/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <fmt/format.h>

#include "noiseforge/errors.hpp"

namespace noiseforge {
namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
  cursor->offset += length;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngErrorSink {
  char message[256] = {};
};

[[noreturn]] void png_record_error(png_structp png, png_const_charp message) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof(sink->message), "%s", message);
  png_longjmp(png, 1);
}

void png_warn_ignore(png_structp, png_const_charp) {}

// Runs libpng calls under a setjmp guard and rethrows codec errors as IoError.
// The body may only hold trivially destructible locals, since a codec error
// longjmps over its frame.
template <class Body>
void png_guarded(png_structp png, const PngErrorSink& sink, Body&& body) {
  if (setjmp(png_jmpbuf(png)) != 0) throw IoError(fmt::format("PNG codec: {}", sink.message));
  body();
}

class PngReader {
 public:
  PngReader() {
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink_, png_record_error, png_warn_ignore);
    if (png_ == nullptr) throw IoError("cannot allocate PNG reader");
    info_ = png_create_info_struct(png_);
    if (info_ == nullptr) {
      png_destroy_read_struct(&png_, nullptr, nullptr);
      throw IoError("cannot allocate PNG info");
    }
  }
  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }
  const PngErrorSink& sink() const { return sink_; }

 private:
  PngErrorSink sink_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

class PngWriter {
 public:
  PngWriter() {
    png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink_, png_record_error, png_warn_ignore);
    if (png_ == nullptr) throw IoError("cannot allocate PNG writer");
    info_ = png_create_info_struct(png_);
    if (info_ == nullptr) {
      png_destroy_write_struct(&png_, nullptr);
      throw IoError("cannot allocate PNG info");
    }
  }
  ~PngWriter() { png_destroy_write_struct(&png_, &info_); }
  PngWriter(const PngWriter&) = delete;
  PngWriter& operator=(const PngWriter&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }
  const PngErrorSink& sink() const { return sink_; }

 private:
  PngErrorSink sink_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

QuantizedImage decode_png(std::span<const std::uint8_t> bytes) {
  PngReader reader;
  ReadCursor cursor{bytes, 0};
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int channels = 0;
  png_guarded(reader.png(), reader.sink(), [&] {
    png_set_read_fn(reader.png(), &cursor, png_read_from_span);
    png_read_info(reader.png(), reader.info());
    png_get_IHDR(reader.png(), reader.info(), &width, &height, &bit_depth, &color_type, nullptr,
                 nullptr, nullptr);
    channels = png_get_channels(reader.png(), reader.info());
  });
  if (color_type != PNG_COLOR_TYPE_GRAY) {
    throw IoError(fmt::format(
        "PNG has {} channel(s) or a palette; only single-channel grayscale is supported",
        channels));
  }
  if (bit_depth == 16) throw IoError("16-bit PNG is not supported; expected 8-bit grayscale");

  const Extent extent{height, width};
  std::vector<std::uint8_t> pixels(extent.area());
  std::vector<png_bytep> rows(height);
  for (std::size_t r = 0; r < height; ++r) rows[r] = pixels.data() + r * width;
  png_bytepp row_ptrs = rows.data();
  png_guarded(reader.png(), reader.sink(), [&] {
    if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(reader.png());
    png_read_update_info(reader.png(), reader.info());
    png_read_image(reader.png(), row_ptrs);
    png_read_end(reader.png(), nullptr);
  });
  return QuantizedImage(extent, std::move(pixels));
}

std::vector<std::uint8_t> encode_png(const QuantizedImage& img) {
  std::vector<std::uint8_t> out;
  PngWriter writer;
  std::vector<png_bytep> rows(img.height());
  for (std::size_t r = 0; r < img.height(); ++r) {
    rows[r] = const_cast<png_bytep>(img.pixels().data() + r * img.width());
  }
  png_bytepp row_ptrs = rows.data();
  const auto width = static_cast<png_uint_32>(img.width());
  const auto height = static_cast<png_uint_32>(img.height());
  png_guarded(writer.png(), writer.sink(), [&] {
    png_set_write_fn(writer.png(), &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(writer.png(), writer.info(), width, height, 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(writer.png(), 6);
    png_write_info(writer.png(), writer.info());
    png_write_image(writer.png(), row_ptrs);
    png_write_end(writer.png(), nullptr);
  });
  return out;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos]) != 0) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && std::isspace(bytes[pos]) == 0) token.push_back(static_cast<char>(bytes[pos++]));
  return token;
}

std::size_t pgm_number(std::span<const std::uint8_t> bytes, std::size_t& pos, const char* what) {
  const std::string token = pgm_token(bytes, pos);
  if (token.empty() || !std::all_of(token.begin(), token.end(), ::isdigit)) {
    throw IoError(fmt::format("malformed PGM header: bad {} '{}'", what, token));
  }
  return std::stoul(token);
}

QuantizedImage decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const std::string magic = pgm_token(bytes, pos);
  if (magic == "P6" || magic == "P3") {
    throw IoError("PPM colour image is not supported; expected single-channel grayscale");
  }
  if (magic != "P5") throw IoError(fmt::format("unsupported PNM magic '{}'; expected P5", magic));
  const std::size_t width = pgm_number(bytes, pos, "width");
  const std::size_t height = pgm_number(bytes, pos, "height");
  const std::size_t maxval = pgm_number(bytes, pos, "maxval");
  if (maxval != 255) throw IoError(fmt::format("PGM maxval {} unsupported; expected 255", maxval));
  ++pos;  // single whitespace byte before the raster
  const Extent extent{height, width};
  if (extent.area() == 0) throw DimensionError("PGM image has zero area");
  if (pos + extent.area() > bytes.size()) throw IoError("truncated PGM raster");
  std::vector<std::uint8_t> pixels(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + extent.area()));
  return QuantizedImage(extent, std::move(pixels));
}

std::vector<std::uint8_t> encode_pgm(const QuantizedImage& img) {
  const std::string header = fmt::format("P5\n{} {}\n255\n", img.width(), img.height());
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels().begin(), img.pixels().end());
  return out;
}

}  // namespace

ImageFormat format_for_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return ImageFormat::png;
  if (ext == ".pgm") return ImageFormat::pgm;
  throw IoError(fmt::format("unsupported image extension for {}", path.string()));
}

QuantizedImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= sizeof(kPngSignature) &&
      std::equal(std::begin(kPngSignature), std::end(kPngSignature), bytes.begin())) {
    return decode_png(bytes);
  }
  return decode_pgm(bytes);
}

std::vector<std::uint8_t> encode_image(const QuantizedImage& img, ImageFormat format) {
  return format == ImageFormat::png ? encode_png(img) : encode_pgm(img);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

QuantizedImage read_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_image(bytes);
  } catch (const IoError& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_image(const std::filesystem::path& path, const QuantizedImage& img) {
  write_file_if_changed(path, encode_image(img, format_for_path(path)));
}

bool write_file_if_changed(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (std::filesystem::exists(path, ec) &&
      std::filesystem::file_size(path, ec) == bytes.size()) {
    const auto existing = read_file_bytes(path);
    if (std::equal(existing.begin(), existing.end(), bytes.begin(), bytes.end())) return false;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("short write to {}", path.string()));
  return true;
}

}  // namespace noiseforge
