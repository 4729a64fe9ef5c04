#include "pnpmm/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cctype>
#include <cstring>
#include <limits>
#include <fstream>
#include <iterator>
#include <sstream>

namespace pnpmm {

namespace {

constexpr const char* kModule = "io";
constexpr std::array<char, 4> kFrasMagic{'F', 'R', 'A', 'S'};

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, kModule, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, kModule, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, kModule, "write failed for " + path.string());
}

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

void append_f64_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

double read_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

Raster parse_fras(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  if (bytes.size() < 12) throw Error(ErrorKind::Format, kModule, "truncated FRAS header in " + path.string());
  const std::uint32_t w = read_u32_le(&bytes[4]);
  const std::uint32_t h = read_u32_le(&bytes[8]);
  if (w == 0 || h == 0) throw Error(ErrorKind::Format, kModule, "empty FRAS raster in " + path.string());
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() != 12 + 8 * n) {
    throw Error(ErrorKind::Format, kModule,
                "FRAS payload of " + path.string() + " has " + std::to_string(bytes.size() - 12) +
                    " bytes, expected " + std::to_string(8 * n));
  }
  std::vector<double> values(n);
  for (std::size_t k = 0; k < n; ++k) values[k] = read_f64_le(&bytes[12 + 8 * k]);
  return Raster(w, h, std::move(values));
}

// Netpbm header token, skipping whitespace and '#' comments.
std::string next_token(const std::vector<unsigned char>& bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  return token;
}

std::size_t parse_header_int(const std::string& token, const std::filesystem::path& path) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
    throw Error(ErrorKind::Format, kModule, "malformed PGM header in " + path.string());
  }
  return value;
}

struct PgmImage {
  std::size_t width;
  std::size_t height;
  std::size_t maxval;
  std::vector<unsigned char> pixels;
};

PgmImage parse_pgm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  std::size_t pos = 2;
  const std::size_t w = parse_header_int(next_token(bytes, pos), path);
  const std::size_t h = parse_header_int(next_token(bytes, pos), path);
  const std::size_t maxval = parse_header_int(next_token(bytes, pos), path);
  if (w == 0 || h == 0) throw Error(ErrorKind::Format, kModule, "empty PGM image in " + path.string());
  if (maxval == 0 || maxval > 255) {
    throw Error(ErrorKind::Format, kModule, "only 8-bit PGM is supported (" + path.string() + ")");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorKind::Format, kModule, "malformed PGM header in " + path.string());
  }
  ++pos;  // single whitespace before the raster
  if (bytes.size() - pos < w * h) {
    throw Error(ErrorKind::Format, kModule, "truncated PGM payload in " + path.string());
  }
  return {w, h, maxval, std::vector<unsigned char>(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + w * h))};
}

bool has_magic(const std::vector<unsigned char>& bytes, const char* magic, std::size_t n) {
  return bytes.size() >= n && std::memcmp(bytes.data(), magic, n) == 0;
}

}  // namespace

Raster load_raster(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  if (has_magic(bytes, kFrasMagic.data(), 4)) return parse_fras(bytes, path);
  if (has_magic(bytes, "P5", 2)) {
    const PgmImage img = parse_pgm(bytes, path);
    Raster out(img.width, img.height);
    const auto scale = static_cast<double>(img.maxval);
    for (std::size_t k = 0; k < out.size(); ++k) out.values[k] = static_cast<double>(img.pixels[k]) / scale;
    return out;
  }
  throw Error(ErrorKind::Format, kModule, "unrecognised raster magic in " + path.string());
}

void save_raster(const std::filesystem::path& path, const Raster& raster, RasterFormat format, double peak) {
  std::string bytes;
  if (format == RasterFormat::Fras) {
    bytes.assign(kFrasMagic.begin(), kFrasMagic.end());
    append_u32_le(bytes, static_cast<std::uint32_t>(raster.width));
    append_u32_le(bytes, static_cast<std::uint32_t>(raster.height));
    for (double v : raster.values) append_f64_le(bytes, v);
  } else {
    if (!(peak > 0.0)) throw Error(ErrorKind::Configuration, kModule, "PGM peak must be positive");
    bytes = "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n255\n";
    for (double v : raster.values) {
      const double clamped = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, peak);
      bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::floor(clamped / peak * 255.0 + 0.5))));
    }
  }
  write_all(path, bytes);
}

MeasurementVector load_measurement(const std::filesystem::path& path) {
  return MeasurementVector(load_raster(path).values);
}

void save_measurement(const std::filesystem::path& path, const MeasurementVector& v) {
  save_raster(path, Raster(v.size(), 1, v.bins), RasterFormat::Fras);
}

RoiMask load_roi(const std::filesystem::path& path, std::string label) {
  const auto bytes = read_all(path);
  if (!has_magic(bytes, "P5", 2)) throw Error(ErrorKind::Format, kModule, "ROI mask must be a P5 PGM");
  const PgmImage img = parse_pgm(bytes, path);
  std::vector<bool> inside(img.pixels.size());
  for (std::size_t k = 0; k < inside.size(); ++k) inside[k] = img.pixels[k] != 0;
  return RoiMask(img.width, img.height, std::move(inside), std::move(label));
}

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
  return std::string(buf.data(), ptr);
}

namespace {

std::string trace_row(std::size_t iter, const TraceRecord& r) {
  std::string row = std::to_string(iter);
  row += ',' + format_real(r.f_value);
  row += ',' + format_real(r.g_value);
  row += ',' + format_real(r.h_value);
  row += ',' + format_real(r.residual_sq);
  row += ',';
  if (r.psnr) row += format_real(*r.psnr);
  row += '\n';
  return row;
}

double parse_real(const std::string& field, const std::filesystem::path& path) {
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorKind::Format, kModule, "bad number '" + field + "' in " + path.string());
  }
  return v;
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, const ConvergenceTrace& trace) {
  std::string out = "iter,f,g,h,residual_sq,psnr\n";
  out += trace_row(0, trace.initial);
  for (std::size_t k = 0; k < trace.records.size(); ++k) out += trace_row(k + 1, trace.records[k]);
  write_all(path, out);
}

ConvergenceTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, kModule, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "iter,f,g,h,residual_sq,psnr") {
    throw Error(ErrorKind::Format, kModule, "unexpected trace header in " + path.string());
  }
  ConvergenceTrace trace;
  bool have_initial = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 6) throw Error(ErrorKind::Format, kModule, "trace row with wrong arity in " + path.string());
    TraceRecord r;
    r.f_value = parse_real(fields[1], path);
    r.g_value = parse_real(fields[2], path);
    r.h_value = parse_real(fields[3], path);
    r.residual_sq = parse_real(fields[4], path);
    if (!fields[5].empty()) r.psnr = parse_real(fields[5], path);
    if (!have_initial) {
      trace.initial = r;
      have_initial = true;
    } else {
      trace.records.push_back(r);
    }
  }
  if (!have_initial) throw Error(ErrorKind::Format, kModule, "empty trace " + path.string());
  return trace;
}

}  // namespace pnpmm
