// io.hpp - image containers (binary PGM, grayscale PNG, raw double
// sidecar) and the dictionary file format.
#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsd/image.hpp"
#include "dsd/sparse.hpp"
#include "dsd/version.hpp"

namespace dsd {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
  const std::array<unsigned char, 4> b{
      static_cast<unsigned char>(v & 0xff),
      static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff),
      static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4))
    throw io_error("unexpected end of file");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

inline void put_f64_le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i)
    b[size_t(i)] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}

inline double get_f64_le(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8))
    throw io_error("unexpected end of file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[size_t(i)]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

// Next PGM header token, skipping whitespace and '#' comments.
inline std::string pgm_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(char(ch));
  }
  if (tok.empty()) throw io_error("pgm: truncated header");
  return tok;
}

inline unsigned clip_round(double v, unsigned maxval) {
  const double r = std::nearbyint(v);
  if (r <= 0.0) return 0;
  if (r >= double(maxval)) return maxval;
  return unsigned(r);
}

} // namespace detail

// ----------------------------------------------------------------------
// PGM (P5, 8-bit or 16-bit big-endian samples)
// ----------------------------------------------------------------------

inline Image read_pgm(std::istream& is) {
  if (detail::pgm_token(is) != "P5")
    throw io_error("pgm: only binary P5 grayscale is supported");
  const int width = std::stoi(detail::pgm_token(is));
  const int height = std::stoi(detail::pgm_token(is));
  const long maxval = std::stol(detail::pgm_token(is));
  if (width < 1 || height < 1) throw io_error("pgm: bad dimensions");
  if (maxval < 1 || maxval > 65535) throw io_error("pgm: bad maxval");

  Image img(height, width, 0.0, double(maxval));
  const bool wide = maxval > 255;
  std::vector<unsigned char> row(size_t(width) * (wide ? 2 : 1));
  for (int r = 0; r < height; ++r) {
    if (!is.read(reinterpret_cast<char*>(row.data()),
                 std::streamsize(row.size())))
      throw io_error("pgm: truncated pixel data");
    for (int c = 0; c < width; ++c)
      img.at(r, c) = wide ? double(256u * row[size_t(2 * c)] + row[size_t(2 * c + 1)])
                          : double(row[size_t(c)]);
  }
  return img;
}

inline void write_pgm(std::ostream& os, const Image& img) {
  require_valid(img);
  const unsigned maxval = img.dynamic_range > 255.0 ? 65535u : 255u;
  os << "P5\n" << img.width() << " " << img.height() << "\n" << maxval << "\n";
  for (Eigen::Index r = 0; r < img.height(); ++r)
    for (Eigen::Index c = 0; c < img.width(); ++c) {
      const unsigned v = detail::clip_round(img.at(r, c), maxval);
      if (maxval > 255) {
        os.put(char((v >> 8) & 0xff));
        os.put(char(v & 0xff));
      } else {
        os.put(char(v & 0xff));
      }
    }
  if (!os) throw io_error("pgm: write failed");
}

// ----------------------------------------------------------------------
// Raw double sidecar (.dsf): "DSF1", u32 height, u32 width, row-major
// float64, all little-endian. Keeps unclipped values for metric fidelity.
// ----------------------------------------------------------------------

inline Image read_dsf(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::memcmp(magic.data(), "DSF1", 4) != 0)
    throw io_error("dsf: bad magic");
  const std::uint32_t height = detail::get_u32_le(is);
  const std::uint32_t width = detail::get_u32_le(is);
  if (height < 1 || width < 1) throw io_error("dsf: bad dimensions");
  Image img(height, width);
  for (std::uint32_t r = 0; r < height; ++r)
    for (std::uint32_t c = 0; c < width; ++c)
      img.at(r, c) = detail::get_f64_le(is);
  return img;
}

inline void write_dsf(std::ostream& os, const Image& img) {
  os.write("DSF1", 4);
  detail::put_u32_le(os, std::uint32_t(img.height()));
  detail::put_u32_le(os, std::uint32_t(img.width()));
  for (Eigen::Index r = 0; r < img.height(); ++r)
    for (Eigen::Index c = 0; c < img.width(); ++c)
      detail::put_f64_le(os, img.at(r, c));
  if (!os) throw io_error("dsf: write failed");
}

// ----------------------------------------------------------------------
// PNG (grayscale 8/16-bit via libpng)
// ----------------------------------------------------------------------

namespace detail {

struct PngReadCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadCtx() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriteCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteCtx() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

} // namespace detail

inline Image read_png(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(
      std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw io_error("png: cannot open " + path);

  detail::PngReadCtx ctx;
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                   nullptr);
  if (!ctx.png) throw io_error("png: init failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw io_error("png: init failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw io_error("png: malformed file " + path);

  png_init_io(ctx.png, fp.get());
  png_read_info(ctx.png, ctx.info);

  const png_byte color = png_get_color_type(ctx.png, ctx.info);
  if (color != PNG_COLOR_TYPE_GRAY)
    throw io_error("png: only grayscale input is accepted (" + path + ")");
  if (png_get_bit_depth(ctx.png, ctx.info) < 8)
    png_set_expand_gray_1_2_4_to_8(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const png_uint_32 width = png_get_image_width(ctx.png, ctx.info);
  const png_uint_32 height = png_get_image_height(ctx.png, ctx.info);
  const int depth = png_get_bit_depth(ctx.png, ctx.info);
  const size_t rowbytes = png_get_rowbytes(ctx.png, ctx.info);

  std::vector<unsigned char> raster(size_t(height) * rowbytes);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 r = 0; r < height; ++r)
    rows[r] = raster.data() + size_t(r) * rowbytes;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  Image img(height, width, 0.0, depth == 16 ? 65535.0 : 255.0);
  for (png_uint_32 r = 0; r < height; ++r)
    for (png_uint_32 c = 0; c < width; ++c)
      img.at(r, c) = depth == 16
                         ? double(256u * rows[r][2 * c] + rows[r][2 * c + 1])
                         : double(rows[r][c]);
  return img;
}

inline void write_png(const std::string& path, const Image& img) {
  require_valid(img);
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(
      std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw io_error("png: cannot create " + path);

  detail::PngWriteCtx ctx;
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                    nullptr);
  if (!ctx.png) throw io_error("png: init failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw io_error("png: init failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw io_error("png: write failed " + path);

  const bool wide = img.dynamic_range > 255.0;
  const unsigned maxval = wide ? 65535u : 255u;
  png_init_io(ctx.png, fp.get());
  png_set_IHDR(ctx.png, ctx.info, png_uint_32(img.width()),
               png_uint_32(img.height()), wide ? 16 : 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);

  std::vector<unsigned char> row(size_t(img.width()) * (wide ? 2 : 1));
  for (Eigen::Index r = 0; r < img.height(); ++r) {
    for (Eigen::Index c = 0; c < img.width(); ++c) {
      const unsigned v = detail::clip_round(img.at(r, c), maxval);
      if (wide) {
        row[size_t(2 * c)] = static_cast<unsigned char>((v >> 8) & 0xff);
        row[size_t(2 * c + 1)] = static_cast<unsigned char>(v & 0xff);
      } else {
        row[size_t(c)] = static_cast<unsigned char>(v & 0xff);
      }
    }
    png_write_row(ctx.png, row.data());
  }
  png_write_end(ctx.png, nullptr);
}

// ----------------------------------------------------------------------
// Dispatch by content (read) / extension (write)
// ----------------------------------------------------------------------

inline Image read_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open " + path);
  std::array<char, 4> head{};
  is.read(head.data(), 4);
  if (!is) throw io_error("cannot read " + path);
  is.seekg(0);

  if (std::memcmp(head.data(), "DSF1", 4) == 0) return read_dsf(is);
  if (head[0] == 'P' && head[1] == '5') return read_pgm(is);
  if (head[0] == 'P' && (head[1] == '6' || head[1] == '2' || head[1] == '3'))
    throw io_error(path + ": only grayscale binary PGM (P5) is accepted");
  const unsigned char png_sig[4] = {0x89, 'P', 'N', 'G'};
  if (std::memcmp(head.data(), png_sig, 4) == 0) {
    is.close();
    return read_png(path);
  }
  throw io_error(path + ": unrecognized image format");
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline void write_image(const std::string& path, const Image& img) {
  if (has_suffix(path, ".png")) {
    write_png(path, img);
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot create " + path);
  if (has_suffix(path, ".dsf"))
    write_dsf(os, img);
  else if (has_suffix(path, ".pgm"))
    write_pgm(os, img);
  else
    throw io_error(path + ": unsupported output format (use .pgm/.png/.dsf)");
}

// ----------------------------------------------------------------------
// Dictionary container: "DSDD", u32 version, u32 N, u32 K, then K*N
// float64 little-endian in column-major order.
// ----------------------------------------------------------------------

inline void write_dictionary(const std::string& path, const Dictionary& dict) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot create " + path);
  os.write("DSDD", 4);
  detail::put_u32_le(os, dict_file_version);
  detail::put_u32_le(os, std::uint32_t(dict.atom_len()));
  detail::put_u32_le(os, std::uint32_t(dict.atom_count()));
  for (Eigen::Index k = 0; k < dict.atom_count(); ++k)
    for (Eigen::Index i = 0; i < dict.atom_len(); ++i)
      detail::put_f64_le(os, dict.atoms(i, k));
  if (!os) throw io_error("dictionary: write failed");
}

inline Dictionary read_dictionary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open " + path);
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::memcmp(magic.data(), "DSDD", 4) != 0)
    throw io_error(path + ": not a dictionary file (bad magic)");
  const std::uint32_t version = detail::get_u32_le(is);
  if (version != dict_file_version)
    throw io_error(path + ": unsupported dictionary version " +
                   std::to_string(version));
  const std::uint32_t n = detail::get_u32_le(is);
  const std::uint32_t k = detail::get_u32_le(is);
  if (n < 1 || k < 1) throw io_error(path + ": bad dictionary dimensions");
  Dictionary dict;
  dict.atoms.resize(n, k);
  for (std::uint32_t kk = 0; kk < k; ++kk)
    for (std::uint32_t i = 0; i < n; ++i)
      dict.atoms(i, kk) = detail::get_f64_le(is);
  return dict;
}

} // namespace dsd
