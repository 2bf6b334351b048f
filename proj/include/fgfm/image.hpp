#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fgfm {

// Writes a 24-bit uncompressed BMP. Pixels are row-major from the top-left,
// three bytes (R, G, B) per pixel; rgb.size() must be width*height*3.
void write_bmp(const std::string& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& rgb);

}  // namespace fgfm
