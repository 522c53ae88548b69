#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "reldet/numeric/tensor.hpp"

namespace reldet::data {

/// Binary PPM (P6, maxval 255) of a [3×H×W] tensor with values in [0,1];
/// each sample is round(255·v) after clamping.
std::string encode_ppm(const numeric::Tensor& image);

/// Parses P6 with maxval ≤ 255 (header comments allowed) into [3×H×W] values
/// sample/maxval. Throws ParseError with the byte offset of the problem.
numeric::Tensor decode_ppm(std::string_view bytes);

void write_ppm(const std::filesystem::path& path, const numeric::Tensor& image);
numeric::Tensor read_ppm(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace reldet::data
