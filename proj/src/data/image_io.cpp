#include "reldet/data/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include "reldet/errors.hpp"

namespace reldet::data {

namespace nm = reldet::numeric;

std::string encode_ppm(const nm::Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw DimensionError("encode_ppm: expected [3 x H x W], got " + nm::shape_str(image.shape()));
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + 3 * w * h);
  const auto v = image.data();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double s = std::clamp(v[(c * h + y) * w + x], 0.0, 1.0);
        out[header + (y * w + x) * 3 + c] = static_cast<char>(std::lround(255.0 * s));
      }
  return out;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("ppm: " + msg, pos_, line_);
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (c == '\n') ++line_;
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_])))
      fail(std::string("expected ") + what);
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > 1u << 24) fail(std::string(what) + " too large");
      ++pos_;
    }
    return value;
  }

  void magic() {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || bytes_[1] != '6') fail("missing P6 magic");
    pos_ = 2;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void raster_separator() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      fail("expected whitespace before raster");
    ++pos_;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace

nm::Tensor decode_ppm(std::string_view bytes) {
  HeaderReader reader(bytes);
  reader.magic();
  const std::size_t w = reader.number("width");
  const std::size_t h = reader.number("height");
  const std::size_t maxval = reader.number("maxval");
  if (w == 0 || h == 0) reader.fail("zero image extent");
  if (maxval == 0 || maxval > 255) reader.fail("maxval must be in 1..255");
  reader.raster_separator();
  const std::size_t start = reader.pos();
  const std::size_t need = 3 * w * h;
  if (bytes.size() - start < need)
    throw ParseError("ppm: raster truncated, need " + std::to_string(need) + " bytes, have " +
                         std::to_string(bytes.size() - start),
                     bytes.size());
  std::vector<double> v(need);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t at = start + (y * w + x) * 3 + c;
        const auto sample = static_cast<unsigned char>(bytes[at]);
        if (sample > maxval) throw ParseError("ppm: sample exceeds maxval", at);
        v[(c * h + y) * w + x] = sample * scale;
      }
  return nm::Tensor({3, h, w}, std::move(v));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void write_ppm(const std::filesystem::path& path, const nm::Tensor& image) {
  write_file(path, encode_ppm(image));
}

nm::Tensor read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

}  // namespace reldet::data
