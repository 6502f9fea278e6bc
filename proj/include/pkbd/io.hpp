#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pkbd/densities.hpp"
#include "pkbd/errors.hpp"
#include "pkbd/sphere.hpp"

namespace pkbd {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kModelSchema = "pkbd-model/1";
inline constexpr const char* kManifestSchema = "pkbd-manifest/1";

/// Shortest text that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out)
    if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

enum class HeaderMode { Auto, Present, Absent };

struct CsvOptions {
  HeaderMode header = HeaderMode::Auto;
  /// Label column given by header name or zero-based index; empty for none.
  std::string label_column;
};

/// Raw CSV contents: header names (possibly generated) and string cells
/// tagged with their 1-based source line.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  bool had_header = false;

  std::size_t column_index(const std::string& name_or_index) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name_or_index) return j;
    if (auto idx = detail::parse_int(name_or_index); idx && *idx >= 0 &&
                                                      static_cast<std::size_t>(*idx) < header.size())
      return static_cast<std::size_t>(*idx);
    throw Error(ErrorCode::ParseError, "no column named '" + name_or_index + "'");
  }
};

/// Reads comma-separated text. With HeaderMode::Auto the first line is a
/// header when any of its fields is not a number.
inline CsvTable read_csv_table(std::istream& in, HeaderMode mode = HeaderMode::Auto) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || line.front() == '#') continue;
    auto fields = detail::split_csv_line(line);
    if (first) {
      first = false;
      width = fields.size();
      bool header = mode == HeaderMode::Present;
      if (mode == HeaderMode::Auto)
        header = std::any_of(fields.begin(), fields.end(),
                             [](const std::string& f) { return !detail::parse_double(f); });
      if (header) {
        t.header = std::move(fields);
        t.had_header = true;
        continue;
      }
      for (std::size_t j = 0; j < width; ++j) t.header.push_back(std::to_string(j));
    }
    if (fields.size() != width)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(width) + " fields, found " +
                                             std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.rows.empty()) throw Error(ErrorCode::ParseError, "CSV has no data rows");
  return t;
}

/// Integer labels from a column. Integer cells are kept as they are; any other
/// text is mapped to 0, 1, ... in order of first appearance.
inline std::vector<int> labels_from_column(const CsvTable& t, std::size_t col) {
  std::vector<int> out;
  out.reserve(t.rows.size());
  bool all_int = std::all_of(t.rows.begin(), t.rows.end(),
                             [&](const auto& r) { return detail::parse_int(r[col]).has_value(); });
  std::map<std::string, int> codes;
  for (const auto& r : t.rows) {
    if (all_int) {
      out.push_back(*detail::parse_int(r[col]));
    } else {
      auto [it, inserted] = codes.emplace(r[col], static_cast<int>(codes.size()));
      out.push_back(it->second);
    }
  }
  return out;
}

/// Turns a table into a dataset: every non-label column is a coordinate and
/// each row is normalized onto the sphere. All-zero rows abort with their
/// line numbers.
inline Dataset dataset_from_table(const CsvTable& t, const std::string& label_column = "") {
  std::optional<std::size_t> label_col;
  if (!label_column.empty()) label_col = t.column_index(label_column);
  const std::size_t d = t.header.size() - (label_col ? 1 : 0);
  if (d < 2) throw Error(ErrorCode::InvalidDimension, "need at least 2 coordinate columns");

  std::vector<double> flat;
  flat.reserve(t.rows.size() * d);
  std::vector<std::size_t> zero_lines;
  std::vector<double> row(d);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < t.rows[i].size(); ++j) {
      if (label_col && j == *label_col) continue;
      const auto v = detail::parse_double(t.rows[i][j]);
      if (!v || !std::isfinite(*v))
        throw Error(ErrorCode::ParseError, "line " + std::to_string(t.line_numbers[i]) +
                                               ": bad number '" + t.rows[i][j] + "'");
      row[k++] = *v;
    }
    const double nrm = norm(row);
    if (!(nrm > kZeroNorm)) {
      zero_lines.push_back(t.line_numbers[i]);
      continue;
    }
    for (double x : row) flat.push_back(x / nrm);
  }
  if (!zero_lines.empty()) {
    std::string msg = "all-zero rows cannot be normalized; line(s)";
    for (std::size_t z : zero_lines) msg += " " + std::to_string(z);
    throw Error(ErrorCode::ZeroVector, msg);
  }
  Dataset data(d, std::move(flat));
  if (label_col) data.set_labels(labels_from_column(t, *label_col));
  return data;
}

inline Dataset read_dataset_csv(const std::string& path, const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  return dataset_from_table(read_csv_table(in, opts.header), opts.label_column);
}

/// Points as CSV with header x1..xd, plus a trailing label column when present.
inline void write_dataset_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t j = 0; j < data.dim(); ++j) out << (j ? "," : "") << 'x' << (j + 1);
  if (data.labels()) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = data.point(i);
    for (std::size_t j = 0; j < p.size(); ++j) out << (j ? "," : "") << format_double(p[j]);
    if (data.labels()) out << ',' << (*data.labels())[i];
    out << '\n';
  }
}

inline void write_points_csv(std::ostream& out, const std::vector<UnitVector>& points) {
  if (points.empty()) return;
  const std::size_t d = points.front().dim();
  for (std::size_t j = 0; j < d; ++j) out << (j ? "," : "") << 'x' << (j + 1);
  out << '\n';
  for (const auto& p : points) {
    for (std::size_t j = 0; j < d; ++j) out << (j ? "," : "") << format_double(p[j]);
    out << '\n';
  }
}

// ---- model JSON ----

inline nlohmann::json model_to_json(const MixtureModel& model) {
  nlohmann::json j;
  j["schema"] = kModelSchema;
  j["d"] = model.d;
  j["noise_weight"] = model.noise_weight;
  j["has_noise"] = model.has_noise;
  auto comps = nlohmann::json::array();
  for (std::size_t k = 0; k < model.num_components(); ++k) {
    const auto& c = model.components[k];
    comps.push_back({{"weight", model.weights[k]}, {"mu", c.mu().vec()}, {"rho", c.rho()}});
  }
  j["components"] = std::move(comps);
  return j;
}

inline MixtureModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kModelSchema)
      throw Error(ErrorCode::ParseError, "unsupported model schema " + j.at("schema").dump());
    MixtureModel m;
    m.d = j.at("d").get<std::size_t>();
    m.noise_weight = j.value("noise_weight", 0.0);
    m.has_noise = j.value("has_noise", m.noise_weight > 0.0);
    for (const auto& c : j.at("components")) {
      m.components.emplace_back(normalize(c.at("mu").get<std::vector<double>>()),
                                c.at("rho").get<double>());
      m.weights.push_back(c.at("weight").get<double>());
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model JSON: ") + e.what());
  }
}

// ---- run manifest ----

struct RunManifest {
  std::string subcommand;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;
  std::string version = kVersion;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  return {{"schema", kManifestSchema}, {"subcommand", m.subcommand}, {"params", m.params},
          {"seed", m.seed},           {"inputs", m.inputs},         {"outputs", m.outputs},
          {"duration_seconds", m.duration_seconds}, {"version", m.version}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    m.params = j.at("params");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.duration_seconds = j.at("duration_seconds").get<double>();
    m.version = j.at("version").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest JSON: ") + e.what());
  }
}

// ---- SVG line plot ----

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Self-contained SVG line chart with axes, ticks and a legend.
inline std::string svg_line_plot(const std::string& title, const std::string& x_label,
                                 const std::string& y_label, const std::vector<PlotSeries>& series) {
  constexpr double W = 640, H = 420, L = 80, R = 20, T = 40, B = 60;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  y0 = std::min(y0, 0.0);
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return std::string(buf);
  };
  auto esc = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else o += c;
    }
    return o;
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title)
    << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0;
    const double yv = y0 + (y1 - y0) * i / 5.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << num(xv)
      << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv)
      << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << py(yv) << "\" x2=\"" << W - R << "\" y2=\"" << py(yv)
      << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
    << esc(x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << (T + H - B) / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << esc(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* col = colors[s % 5];
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i)
      o << (i ? " " : "") << px(series[s].x[i]) << ',' << py(series[s].y[i]);
    o << "\"/>\n";
    for (std::size_t i = 0; i < series[s].x.size(); ++i)
      o << "<circle cx=\"" << px(series[s].x[i]) << "\" cy=\"" << py(series[s].y[i])
        << "\" r=\"3\" fill=\"" << col << "\"/>\n";
    if (!series[s].name.empty())
      o << "<text x=\"" << W - R - 6 << "\" y=\"" << T + 14 + 16 * s << "\" text-anchor=\"end\" fill=\""
        << col << "\">" << esc(series[s].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace pkbd
