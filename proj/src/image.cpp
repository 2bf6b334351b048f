#include "fgfm/image.hpp"

#include <fstream>

#include "fgfm/errors.hpp"

namespace fgfm {

namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

}  // namespace

void write_bmp(const std::string& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& rgb) {
  if (width == 0 || height == 0 || rgb.size() != width * height * 3)
    throw DimensionError("write_bmp: buffer size does not match " +
                         std::to_string(width) + "x" + std::to_string(height));

  const std::size_t row_bytes = width * 3;
  const std::size_t padded = (row_bytes + 3) & ~std::size_t{3};
  const std::size_t pixel_bytes = padded * height;
  const std::uint32_t file_size = static_cast<std::uint32_t>(54 + pixel_bytes);

  std::vector<std::uint8_t> out;
  out.reserve(file_size);
  // file header
  out.push_back('B');
  out.push_back('M');
  put_u32(out, file_size);
  put_u32(out, 0);       // reserved
  put_u32(out, 54);      // pixel data offset
  // info header (BITMAPINFOHEADER)
  put_u32(out, 40);
  put_u32(out, static_cast<std::uint32_t>(width));
  put_u32(out, static_cast<std::uint32_t>(height));
  put_u16(out, 1);       // planes
  put_u16(out, 24);      // bits per pixel
  put_u32(out, 0);       // no compression
  put_u32(out, static_cast<std::uint32_t>(pixel_bytes));
  put_u32(out, 2835);    // 72 dpi
  put_u32(out, 2835);
  put_u32(out, 0);
  put_u32(out, 0);

  // BMP rows run bottom-up and store BGR.
  for (std::size_t y = height; y-- > 0;) {
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t p = (y * width + x) * 3;
      out.push_back(rgb[p + 2]);
      out.push_back(rgb[p + 1]);
      out.push_back(rgb[p]);
    }
    for (std::size_t pad = row_bytes; pad < padded; ++pad) out.push_back(0);
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open image for writing: " + path);
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing image: " + path);
}

}  // namespace fgfm
