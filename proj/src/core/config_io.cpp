#include "core/config_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace uqr::config {

using corrupt::BiasStep;
using corrupt::MaskSpec;
using corrupt::MotionSegment;
using corrupt::MotionStep;
using corrupt::Recipe;
using corrupt::RegionStep;
using corrupt::RicianStep;
using corrupt::Step;

YAML::Node parse_text(const std::string& text, const std::string& source) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ": parse error at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

YAML::Node load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path.string());
}

std::string where(const YAML::Node& node) {
  const YAML::Mark m = node.Mark();
  if (m.is_null()) return "";
  return " (line " + std::to_string(m.line + 1) + ")";
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void require_map(const YAML::Node& node, const std::string& context) {
  if (!node.IsMap()) throw ConfigError(context + ": expected a mapping" + where(node));
}

void check_keys(const YAML::Node& map, std::initializer_list<std::string_view> allowed, const std::string& context) {
  require_map(map, context);
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(context + ": unknown key '" + key + "'" + where(kv.first));
  }
}

// ---- recipe parsing ---------------------------------------------------------

namespace {

std::vector<Step> parse_steps(const YAML::Node& list, const std::string& context,
                              const std::filesystem::path& base_dir);

MaskSpec parse_mask(const YAML::Node& node, const std::string& ctx, const std::filesystem::path& base_dir) {
  check_keys(node, {"rect", "file", "bitmap"}, ctx);
  if (node.size() != 1) throw ConfigError(ctx + ": exactly one of rect, file, bitmap is required" + where(node));
  if (node["rect"]) {
    auto r = get_or<std::vector<std::size_t>>(node, "rect", {}, ctx);
    if (r.size() != 4) throw ConfigError(ctx + ".rect: expected [row_begin, row_end, col_begin, col_end]" + where(node));
    return MaskSpec::rect(r[0], r[1], r[2], r[3]);
  }
  if (node["file"]) {
    std::filesystem::path p = get_or<std::string>(node, "file", "", ctx);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return MaskSpec::from_file(p);
  }
  auto rows = get_or<std::vector<std::string>>(node, "bitmap", {}, ctx);
  if (rows.empty() || rows[0].empty()) throw ConfigError(ctx + ".bitmap: empty bitmap" + where(node));
  MaskGrid m(rows.size(), rows[0].size(), 0);
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != m.width()) throw ConfigError(ctx + ".bitmap: ragged rows" + where(node));
    for (std::size_t x = 0; x < m.width(); ++x) {
      const char c = rows[y][x];
      if (c != '0' && c != '1') throw ConfigError(ctx + ".bitmap: rows may only hold 0 and 1" + where(node));
      m(y, x) = static_cast<std::uint8_t>(c - '0');
    }
  }
  return MaskSpec::from_bitmap(std::move(m));
}

Step parse_step(const YAML::Node& node, const std::string& ctx, const std::filesystem::path& base_dir) {
  if (!node.IsMap() || node.size() != 1)
    throw ConfigError(ctx + ": each step is a single-key mapping (rician, motion, bias, region)" + where(node));
  const std::string kind = node.begin()->first.as<std::string>();
  const YAML::Node body = node.begin()->second;
  const std::string c = ctx + "." + kind;
  if (kind == "rician") {
    check_keys(body, {"snr_db"}, c);
    return Step{RicianStep{get_required<double>(body, "snr_db", c)}};
  }
  if (kind == "motion") {
    check_keys(body, {"segments"}, c);
    MotionStep m;
    const YAML::Node segs = body["segments"];
    if (segs && !segs.IsSequence()) throw ConfigError(c + ".segments: expected a list" + where(segs));
    if (segs)
      for (std::size_t i = 0; i < segs.size(); ++i) {
        const std::string sc = c + ".segments[" + std::to_string(i) + "]";
        check_keys(segs[i], {"lines", "shift", "rotation_deg"}, sc);
        auto lines = get_required<std::vector<std::size_t>>(segs[i], "lines", sc);
        auto shift = get_or<std::vector<double>>(segs[i], "shift", {0.0, 0.0}, sc);
        if (lines.size() != 2) throw ConfigError(sc + ".lines: expected [begin, end]" + where(segs[i]));
        if (shift.size() != 2) throw ConfigError(sc + ".shift: expected [rows, cols]" + where(segs[i]));
        m.segments.push_back(
            MotionSegment{lines[0], lines[1], shift[0], shift[1], get_or<double>(segs[i], "rotation_deg", 0.0, sc)});
      }
    return Step{std::move(m)};
  }
  if (kind == "bias") {
    check_keys(body, {"order", "coefficients"}, c);
    return Step{BiasStep{get_required<int>(body, "order", c), get_required<std::vector<double>>(body, "coefficients", c)}};
  }
  if (kind == "region") {
    check_keys(body, {"mask", "steps"}, c);
    if (!body["mask"]) throw ConfigError(c + ": missing key 'mask'" + where(body));
    RegionStep r;
    r.mask = parse_mask(body["mask"], c + ".mask", base_dir);
    if (body["steps"]) r.inner = parse_steps(body["steps"], c + ".steps", base_dir);
    return Step{std::move(r)};
  }
  throw ConfigError(ctx + ": unknown step '" + kind + "'" + where(node));
}

std::vector<Step> parse_steps(const YAML::Node& list, const std::string& ctx, const std::filesystem::path& base_dir) {
  if (list.IsNull()) return {};
  if (!list.IsSequence()) throw ConfigError(ctx + ": expected a list of steps" + where(list));
  std::vector<Step> out;
  for (std::size_t i = 0; i < list.size(); ++i)
    out.push_back(parse_step(list[i], ctx + "[" + std::to_string(i) + "]", base_dir));
  return out;
}

Recipe parse_recipe_in(const YAML::Node& root, const std::filesystem::path& base_dir) {
  Recipe r;
  if (!root || root.IsNull()) return r;
  check_keys(root, {"steps"}, "recipe");
  if (root["steps"]) r.steps = parse_steps(root["steps"], "recipe.steps", base_dir);
  try {
    corrupt::validate(r);
  } catch (const RecipeError& e) {
    throw RecipeError(std::string("recipe: ") + e.what());
  }
  return r;
}

// ---- recipe emission --------------------------------------------------------

void emit_steps(YAML::Emitter& out, const std::vector<Step>& steps);

void emit_mask(YAML::Emitter& out, const MaskSpec& m) {
  out << YAML::BeginMap;
  switch (m.kind) {
    case MaskSpec::Kind::Rect:
      out << YAML::Key << "rect" << YAML::Value << YAML::Flow << YAML::BeginSeq << m.row_begin << m.row_end
          << m.col_begin << m.col_end << YAML::EndSeq;
      break;
    case MaskSpec::Kind::File: out << YAML::Key << "file" << YAML::Value << m.path.string(); break;
    case MaskSpec::Kind::Bitmap: {
      out << YAML::Key << "bitmap" << YAML::Value << YAML::BeginSeq;
      for (std::size_t y = 0; y < m.bitmap.height(); ++y) {
        std::string row(m.bitmap.width(), '0');
        for (std::size_t x = 0; x < m.bitmap.width(); ++x) row[x] = static_cast<char>('0' + m.bitmap(y, x));
        out << YAML::DoubleQuoted << row;
      }
      out << YAML::EndSeq;
      break;
    }
  }
  out << YAML::EndMap;
}

void emit_steps(YAML::Emitter& out, const std::vector<Step>& steps) {
  out << YAML::BeginSeq;
  for (const Step& step : steps) {
    out << YAML::BeginMap;
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, RicianStep>) {
            out << YAML::Key << "rician" << YAML::Value << YAML::BeginMap << YAML::Key << "snr_db" << YAML::Value
                << format_double(s.snr_db) << YAML::EndMap;
          } else if constexpr (std::is_same_v<S, MotionStep>) {
            out << YAML::Key << "motion" << YAML::Value << YAML::BeginMap << YAML::Key << "segments" << YAML::Value
                << YAML::BeginSeq;
            for (const auto& seg : s.segments) {
              out << YAML::Flow << YAML::BeginMap;
              out << YAML::Key << "lines" << YAML::Value << YAML::Flow << YAML::BeginSeq << seg.line_begin
                  << seg.line_end << YAML::EndSeq;
              out << YAML::Key << "shift" << YAML::Value << YAML::Flow << YAML::BeginSeq << format_double(seg.shift_rows)
                  << format_double(seg.shift_cols) << YAML::EndSeq;
              out << YAML::Key << "rotation_deg" << YAML::Value << format_double(seg.rotation_deg);
              out << YAML::EndMap;
            }
            out << YAML::EndSeq << YAML::EndMap;
          } else if constexpr (std::is_same_v<S, BiasStep>) {
            out << YAML::Key << "bias" << YAML::Value << YAML::BeginMap;
            out << YAML::Key << "order" << YAML::Value << s.order;
            out << YAML::Key << "coefficients" << YAML::Value << YAML::Flow << YAML::BeginSeq;
            for (double c : s.coefficients) out << format_double(c);
            out << YAML::EndSeq;
            out << YAML::EndMap;
          } else {
            out << YAML::Key << "region" << YAML::Value << YAML::BeginMap;
            out << YAML::Key << "mask" << YAML::Value;
            emit_mask(out, s.mask);
            out << YAML::Key << "steps" << YAML::Value;
            emit_steps(out, s.inner);
            out << YAML::EndMap;
          }
        },
        step.op);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
}

}  // namespace

Recipe parse_recipe(const YAML::Node& root) { return parse_recipe_in(root, {}); }

Recipe load_recipe(const std::filesystem::path& path) {
  return parse_recipe_in(load_file(path), path.parent_path());
}

std::string serialise_recipe(const Recipe& recipe) {
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "steps" << YAML::Value;
  emit_steps(out, recipe.steps);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace uqr::config
