#include "vtd/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "vtd/errors.hpp"

namespace vtd {

namespace {

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(static_cast<uint8_t>(x >> 24));
  v.push_back(static_cast<uint8_t>(x >> 16));
  v.push_back(static_cast<uint8_t>(x >> 8));
  v.push_back(static_cast<uint8_t>(x));
}

uint32_t get_u32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const uint8_t* data, size_t len) {
  put_u32(out, static_cast<uint32_t>(len));
  const size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + len);
  const uint32_t crc = static_cast<uint32_t>(
      ::crc32(0, out.data() + type_pos, static_cast<uInt>(4 + len)));
  put_u32(out, crc);
}

std::vector<uint8_t> zlib_compress(const std::vector<uint8_t>& in) {
  uLongf bound = ::compressBound(static_cast<uLong>(in.size()));
  std::vector<uint8_t> out(bound);
  if (::compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), 6) != Z_OK)
    throw Error("PngError", "deflate failed");
  out.resize(bound);
  return out;
}

std::vector<uint8_t> zlib_decompress(const std::vector<uint8_t>& in, size_t expected) {
  std::vector<uint8_t> out(expected);
  uLongf len = static_cast<uLongf>(expected);
  const int rc = ::uncompress(out.data(), &len, in.data(), static_cast<uLong>(in.size()));
  if (rc != Z_OK || len != expected) throw Error("PngError", "inflate failed");
  return out;
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

const uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

}  // namespace

void write_png_rgb8(const std::string& path, const ImageRgb8& img) {
  if (img.width <= 0 || img.height <= 0 ||
      img.pixels.size() != static_cast<size_t>(img.width) * img.height * 3)
    throw Error("PngError", "inconsistent image buffer");

  const size_t stride = static_cast<size_t>(img.width) * 3;
  std::vector<uint8_t> raw;
  raw.reserve((stride + 1) * static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter type none
    raw.insert(raw.end(), img.pixels.begin() + static_cast<long>(y * stride),
               img.pixels.begin() + static_cast<long>((y + 1) * stride));
  }
  const std::vector<uint8_t> idat = zlib_compress(raw);

  std::vector<uint8_t> out(kSignature, kSignature + 8);
  uint8_t ihdr[13];
  ihdr[0] = static_cast<uint8_t>(img.width >> 24);
  ihdr[1] = static_cast<uint8_t>(img.width >> 16);
  ihdr[2] = static_cast<uint8_t>(img.width >> 8);
  ihdr[3] = static_cast<uint8_t>(img.width);
  ihdr[4] = static_cast<uint8_t>(img.height >> 24);
  ihdr[5] = static_cast<uint8_t>(img.height >> 16);
  ihdr[6] = static_cast<uint8_t>(img.height >> 8);
  ihdr[7] = static_cast<uint8_t>(img.height);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type RGB
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter
  ihdr[12] = 0;  // no interlace
  append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  append_chunk(out, "IDAT", idat.data(), idat.size());
  append_chunk(out, "IEND", nullptr, 0);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("IoError", "cannot write png: " + path);
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

ImageRgb8 read_png_rgb8(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("IoError", "cannot read png: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), kSignature, 8) != 0)
    throw Error("PngError", "not a png file: " + path);

  ImageRgb8 img;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  bool saw_ihdr = false;
  while (pos + 12 <= buf.size()) {
    const uint32_t len = get_u32(&buf[pos]);
    const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
    const uint8_t* data = &buf[pos + 8];
    if (pos + 12 + len > buf.size()) throw Error("PngError", "truncated chunk");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      img.width = static_cast<int>(get_u32(data));
      img.height = static_cast<int>(get_u32(data + 4));
      if (data[8] != 8 || data[9] != 2 || data[12] != 0)
        throw Error("PngError", "unsupported png variant (need RGB8 non-interlaced)");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || img.width <= 0 || img.height <= 0)
    throw Error("PngError", "missing or bad IHDR");

  const size_t stride = static_cast<size_t>(img.width) * 3;
  const size_t raw_size = (stride + 1) * static_cast<size_t>(img.height);
  std::vector<uint8_t> raw = zlib_decompress(idat, raw_size);

  img.pixels.assign(stride * static_cast<size_t>(img.height), 0);
  std::vector<uint8_t> prev(stride, 0);
  for (int y = 0; y < img.height; ++y) {
    const uint8_t filter = raw[static_cast<size_t>(y) * (stride + 1)];
    const uint8_t* src = &raw[static_cast<size_t>(y) * (stride + 1) + 1];
    uint8_t* dst = &img.pixels[static_cast<size_t>(y) * stride];
    for (size_t x = 0; x < stride; ++x) {
      const int a = x >= 3 ? dst[x - 3] : 0;       // left
      const int b = prev[x];                       // up
      const int c = x >= 3 ? prev[x - 3] : 0;      // upper-left
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw Error("PngError", "unknown row filter");
      }
      dst[x] = static_cast<uint8_t>(v);
    }
    std::memcpy(prev.data(), dst, stride);
  }
  return img;
}

}  // namespace vtd
