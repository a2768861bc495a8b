#include "core/checkpoint.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "core/bytes.hpp"

namespace uqr::checkpoint {

namespace {

constexpr std::string_view kMagic = "UQR1\n";

std::string shape_field(const ad::Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out;
}

struct Entry {
  std::string name;
  ad::Shape shape;
  std::size_t offset;
};

// Reads one '\n'-terminated line starting at pos; advances pos past it.
std::string next_line(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  const std::size_t start = pos;
  while (pos < bytes.size() && bytes[pos] != '\n') {
    if (pos - start > 4096) throw FormatError("UQR1: header line too long", start);
    ++pos;
  }
  if (pos >= bytes.size()) throw FormatError("UQR1: truncated header", bytes.size());
  std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.begin() + static_cast<std::ptrdiff_t>(pos));
  ++pos;
  return line;
}

std::size_t parse_count(const std::string& text, const std::string& what, std::size_t at) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || text[0] == '-')
    throw FormatError("UQR1: invalid " + what + " '" + text + "'", at);
  return static_cast<std::size_t>(v);
}

net::NetworkSpec parse_spec(const std::string& line, std::size_t at) {
  std::istringstream is(line);
  std::string tag;
  is >> tag;
  if (tag != "spec") throw FormatError("UQR1: expected spec line", at);
  std::map<std::string, std::string> kv;
  for (std::string field; is >> field;) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw FormatError("UQR1: malformed spec field '" + field + "'", at);
    kv[field.substr(0, eq)] = field.substr(eq + 1);
  }
  auto need = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw FormatError("UQR1: spec line lacks '" + k + "'", at);
    return it->second;
  };
  net::NetworkSpec spec;
  spec.depth = static_cast<int>(parse_count(need("depth"), "depth", at));
  spec.base_channels = static_cast<int>(parse_count(need("base_channels"), "base_channels", at));
  spec.height = parse_count(need("height"), "height", at);
  spec.width = parse_count(need("width"), "width", at);
  try {
    spec.task = net::parse_task(need("task"));
    spec.validate();
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("UQR1: invalid spec: ") + e.what(), at);
  }
  return spec;
}

Entry parse_param(const std::string& line, std::size_t at) {
  std::istringstream is(line);
  std::string tag, name, shape, offset, extra;
  if (!(is >> tag >> name >> shape >> offset) || (is >> extra) || tag != "param")
    throw FormatError("UQR1: malformed parameter line '" + line + "'", at);
  Entry e{name, {}, parse_count(offset, "offset of " + name, at)};
  std::istringstream ss(shape);
  for (std::string d; std::getline(ss, d, ',');) e.shape.push_back(parse_count(d, "extent of " + name, at));
  if (e.shape.empty()) throw FormatError("UQR1: parameter " + name + " has no shape", at);
  return e;
}

}  // namespace

std::vector<std::uint8_t> encode(const net::Model& model) {
  const net::NetworkSpec& s = model.spec();
  std::ostringstream head;
  head << kMagic << "spec depth=" << s.depth << " base_channels=" << s.base_channels << " height=" << s.height
       << " width=" << s.width << " task=" << net::task_name(s.task) << "\n";
  std::size_t offset = 0;
  for (const auto& p : model.params()) {
    head << "param " << p.name << " " << shape_field(p.tensor.shape()) << " " << offset << "\n";
    offset += 4 * p.tensor.size();
  }
  head << "\n";
  const std::string h = head.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.reserve(out.size() + offset);
  for (const auto& p : model.params())
    for (float v : p.tensor.values()) put_f32_le(out, v);
  return out;
}

net::Model decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw FormatError("UQR1: bad magic", 0);
  std::size_t pos = kMagic.size();
  std::size_t line_at = pos;
  const net::NetworkSpec spec = parse_spec(next_line(bytes, pos), line_at);

  std::vector<Entry> entries;
  for (;;) {
    line_at = pos;
    const std::string line = next_line(bytes, pos);
    if (line.empty()) break;
    entries.push_back(parse_param(line, line_at));
  }
  const std::size_t payload = pos;

  const auto layout = net::parameter_layout(spec);
  for (std::size_t i = 0; i < std::max(layout.size(), entries.size()); ++i) {
    if (i >= entries.size()) throw FormatError("UQR1: manifest lacks parameter " + layout[i].name, payload);
    if (i >= layout.size())
      throw FormatError("UQR1: manifest has parameter " + entries[i].name + " not in the spec", payload);
    if (entries[i].name != layout[i].name)
      throw FormatError("UQR1: manifest parameter " + entries[i].name + " where the spec expects " + layout[i].name,
                        payload);
    if (entries[i].shape != layout[i].shape)
      throw FormatError("UQR1: parameter " + entries[i].name + " has shape " + ad::shape_str(entries[i].shape) +
                            ", spec expects " + ad::shape_str(layout[i].shape),
                        payload);
  }

  std::size_t expected = 0;
  for (const auto& e : entries) {
    if (e.offset != expected)
      throw FormatError("UQR1: parameter " + e.name + " has offset " + std::to_string(e.offset) + ", expected " +
                            std::to_string(expected),
                        payload);
    expected += 4 * ad::shape_size(e.shape);
  }
  const std::size_t have = bytes.size() - payload;
  if (have < expected)
    throw FormatError("UQR1: truncated payload, expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(have),
                      bytes.size());
  if (have > expected) throw FormatError("UQR1: trailing bytes after payload", payload + expected);

  ad::ParameterSet<float> params;
  params.reserve(entries.size());
  for (const auto& e : entries) {
    std::vector<float> v(ad::shape_size(e.shape));
    const std::uint8_t* p = bytes.data() + payload + e.offset;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = get_f32_le(p + 4 * i);
      if (!std::isfinite(v[i]))
        throw FormatError("UQR1: parameter " + e.name + " holds a non-finite value", payload + e.offset + 4 * i);
    }
    params.push_back({e.name, ad::Tensor<float>(e.shape, std::move(v))});
  }
  return net::Model(spec, std::move(params));
}

void save(const std::filesystem::path& path, const net::Model& model) { write_file(path, encode(model)); }

net::Model load(const std::filesystem::path& path) { return decode(read_file(path)); }

}  // namespace uqr::checkpoint
