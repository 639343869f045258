#include "mtqa/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace mtqa {
namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int parse_header_int(std::istream& in, const std::filesystem::path& path, const char* what) {
  const std::string tok = next_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": bad PGM " + what + " '" + tok + "'");
  }
}

struct RawPgm {
  int rows = 0;
  int cols = 0;
  int maxval = 0;
  std::vector<std::uint16_t> samples;
};

RawPgm read_raw_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  if (next_token(in) != "P5") throw ParseError(path.string() + ": not a binary PGM (P5)");
  RawPgm raw;
  raw.cols = parse_header_int(in, path, "width");
  raw.rows = parse_header_int(in, path, "height");
  raw.maxval = parse_header_int(in, path, "maxval");
  if (raw.cols <= 0 || raw.rows <= 0 || raw.maxval <= 0 || raw.maxval > 65535) {
    throw ParseError(path.string() + ": invalid PGM dimensions or maxval");
  }
  const std::size_t n = static_cast<std::size_t>(raw.rows) * raw.cols;
  raw.samples.resize(n);
  if (raw.maxval < 256) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw ParseError(path.string() + ": truncated PGM");
    std::copy(buf.begin(), buf.end(), raw.samples.begin());
  } else {
    std::vector<unsigned char> buf(2 * n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
    if (static_cast<std::size_t>(in.gcount()) != 2 * n) throw ParseError(path.string() + ": truncated PGM");
    for (std::size_t i = 0; i < n; ++i) {
      raw.samples[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
  }
  for (auto s : raw.samples) {
    if (s > raw.maxval) throw ParseError(path.string() + ": sample exceeds maxval");
  }
  return raw;
}

void write_raw(const std::filesystem::path& path, int rows, int cols, int maxval,
               const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << "P5\n" << cols << ' ' << rows << '\n' << maxval << '\n';
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

float quantize16(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<float>(std::lround(c * 65535.0f)) / 65535.0f;
}

Image read_pgm(const std::filesystem::path& path) {
  const RawPgm raw = read_raw_pgm(path);
  Image img(raw.rows, raw.cols);
  auto v = img.values();
  const float scale = static_cast<float>(raw.maxval);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(raw.samples[i]) / scale;
  return img;
}

void write_pgm16(const std::filesystem::path& path, const Image& image) {
  std::vector<unsigned char> bytes(2 * image.size());
  auto v = image.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const long s = std::lround(std::clamp(v[i], 0.0f, 1.0f) * 65535.0f);
    bytes[2 * i] = static_cast<unsigned char>((s >> 8) & 0xff);
    bytes[2 * i + 1] = static_cast<unsigned char>(s & 0xff);
  }
  write_raw(path, image.rows(), image.cols(), 65535, bytes);
}

void write_mask_pgm(const std::filesystem::path& path, const Mask& mask) {
  std::vector<unsigned char> bytes(mask.size());
  auto v = mask.values();
  for (std::size_t i = 0; i < v.size(); ++i) bytes[i] = v[i] ? 1 : 0;
  write_raw(path, mask.rows(), mask.cols(), 1, bytes);
}

Mask read_mask_pgm(const std::filesystem::path& path) {
  const RawPgm raw = read_raw_pgm(path);
  Mask m(raw.rows, raw.cols);
  auto v = m.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = raw.samples[i] != 0 ? 1 : 0;
  return m;
}

}  // namespace mtqa
