#include "core/grid.hpp"

#include <cmath>
#include <sstream>

#include "core/bytes.hpp"

namespace uqr {

double rms(const ImageGrid& image) {
  double acc = 0;
  for (double v : image.values()) acc += v * v;
  return image.size() ? std::sqrt(acc / static_cast<double>(image.size())) : 0.0;
}

double mse(const ImageGrid& a, const ImageGrid& b) {
  require_same_shape(a, b, "mse");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

namespace {

constexpr std::size_t kMaxExtent = 1u << 16;

std::vector<std::uint8_t> header(std::size_t h, std::size_t w, const char* dtype) {
  std::string s = "UQG1 " + std::to_string(h) + " " + std::to_string(w) + " " + dtype + "\n";
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

struct Header {
  std::size_t height, width;
  std::string dtype;
  std::size_t data_offset;
};

Header parse_header(std::span<const std::uint8_t> bytes) {
  std::size_t nl = 0;
  while (nl < bytes.size() && nl < 128 && bytes[nl] != '\n') ++nl;
  if (nl >= bytes.size() || bytes[nl] != '\n') throw FormatError("UQG1: missing header line", 0);
  std::string line(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(nl));
  if (line.rfind("UQG1 ", 0) != 0) throw FormatError("UQG1: bad magic", 0);
  std::istringstream is(line.substr(5));
  long long h = -1, w = -1;
  std::string dtype, extra;
  if (!(is >> h >> w >> dtype) || (is >> extra)) throw FormatError("UQG1: malformed header '" + line + "'", 5);
  if (h <= 0 || w <= 0 || static_cast<std::size_t>(h) > kMaxExtent || static_cast<std::size_t>(w) > kMaxExtent)
    throw FormatError("UQG1: invalid extents in '" + line + "'", 5);
  return Header{static_cast<std::size_t>(h), static_cast<std::size_t>(w), dtype, nl + 1};
}

void check_payload(const Header& hd, std::size_t elem, std::size_t total) {
  const std::size_t need = hd.height * hd.width * elem;
  const std::size_t have = total - hd.data_offset;
  if (have < need)
    throw FormatError("UQG1: truncated payload, expected " + std::to_string(need) + " bytes", total);
  if (have > need) throw FormatError("UQG1: trailing bytes after payload", hd.data_offset + need);
}

}  // namespace

std::vector<std::uint8_t> encode_image(const ImageGrid& image) {
  auto out = header(image.height(), image.width(), "f32");
  out.reserve(out.size() + 4 * image.size());
  for (double v : image.values()) put_f32_le(out, static_cast<float>(v));
  return out;
}

std::vector<std::uint8_t> encode_labels(const LabelGrid& labels) {
  auto out = header(labels.height(), labels.width(), "u8");
  out.insert(out.end(), labels.values().begin(), labels.values().end());
  return out;
}

ImageGrid decode_image(std::span<const std::uint8_t> bytes) {
  Header hd = parse_header(bytes);
  if (hd.dtype != "f32") throw FormatError("UQG1: expected dtype f32, found " + hd.dtype, 5);
  check_payload(hd, 4, bytes.size());
  ImageGrid g(hd.height, hd.width);
  const std::uint8_t* p = bytes.data() + hd.data_offset;
  for (std::size_t i = 0; i < g.size(); ++i) {
    float v = get_f32_le(p + 4 * i);
    if (!std::isfinite(v)) throw FormatError("UQG1: non-finite value", hd.data_offset + 4 * i);
    g[i] = v;
  }
  return g;
}

LabelGrid decode_labels(std::span<const std::uint8_t> bytes) {
  Header hd = parse_header(bytes);
  if (hd.dtype != "u8") throw FormatError("UQG1: expected dtype u8, found " + hd.dtype, 5);
  check_payload(hd, 1, bytes.size());
  return LabelGrid(hd.height, hd.width,
                   std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(hd.data_offset), bytes.end()));
}

void save_image(const std::filesystem::path& path, const ImageGrid& image) { write_file(path, encode_image(image)); }
void save_labels(const std::filesystem::path& path, const LabelGrid& labels) {
  write_file(path, encode_labels(labels));
}
ImageGrid load_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }
LabelGrid load_labels(const std::filesystem::path& path) { return decode_labels(read_file(path)); }

}  // namespace uqr
