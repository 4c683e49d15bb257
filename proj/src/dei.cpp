#include "rulkit/dei.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

namespace rulkit {

DeiSeries normalize_with(const DeiSeries& series, double min, double max,
                         double eps) {
  if (series.normalized) throw Error("normalize: series is already normalized");
  if (!(eps > 0.0) || !(eps < 0.5))
    throw Error("normalize: eps must lie in (0, 0.5)");
  if (!(max > min))
    throw Error("normalize: degenerate range, max must exceed min");
  DeiSeries out = series;
  out.values = ((series.values.array() - min) / (max - min))
                   .max(eps)
                   .min(1.0 - eps)
                   .matrix();
  out.normalized = true;
  out.norm_min = min;
  out.norm_max = max;
  out.norm_eps = eps;
  return out;
}

DeiSeries normalize(const DeiSeries& series, double eps) {
  if (series.values.size() == 0) throw Error("normalize: empty series");
  return normalize_with(series, series.values.minCoeff(),
                        series.values.maxCoeff(), eps);
}

void save_dei(const std::filesystem::path& file, const DeiSeries& series) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write DEI file: " + file.string());
  out << "# DEI v1 normalized=" << (series.normalized ? 1 : 0)
      << " min=" << format_full(series.norm_min)
      << " max=" << format_full(series.norm_max)
      << " eps=" << format_full(series.norm_eps)
      << " tau=" << format_full(series.unit_interval) << '\n';
  for (int i = 0; i < series.length(); ++i)
    out << (i + 1) << '\t' << format_full(series.values[i]) << '\n';
}

DeiSeries load_dei(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open DEI file: " + file.string());
  std::string header;
  if (!std::getline(in, header) || header.rfind("# DEI v1", 0) != 0)
    throw Error("DEI file " + file.string() + ": missing '# DEI v1' header");

  DeiSeries s;
  auto field = [&](const std::string& key) {
    const std::string tag = " " + key + "=";
    const auto pos = header.find(tag);
    if (pos == std::string::npos)
      throw Error("DEI file " + file.string() + ": header lacks " + key);
    return std::strtod(header.c_str() + pos + tag.size(), nullptr);
  };
  s.normalized = field("normalized") != 0.0;
  s.norm_min = field("min");
  s.norm_max = field("max");
  s.norm_eps = field("eps");
  s.unit_interval = field("tau");

  std::vector<double> values;
  std::string line;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    long idx = 0;
    double v = 0.0;
    if (std::sscanf(line.c_str(), "%ld %lf", &idx, &v) != 2)
      throw Error("DEI file " + file.string() + ": bad row " +
                  std::to_string(row));
    if (idx != static_cast<long>(values.size()) + 1)
      throw Error("DEI file " + file.string() + ": unit index out of order at row " +
                  std::to_string(row));
    values.push_back(v);
  }
  s.values = Eigen::Map<const VecX>(values.data(), values.size());
  return s;
}

}  // namespace rulkit
