#include "rulkit/kv.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rulkit {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

KvMap parse_kv_text(const std::string& text, const std::string& origin) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(origin + ": row " + std::to_string(row) +
                  ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw Error(origin + ": row " + std::to_string(row) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KvMap read_kv_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open file: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kv_text(buf.str(), file.string());
}

void reject_unknown_keys(const KvMap& kv,
                         std::initializer_list<const char*> known,
                         const std::string& origin) {
  for (const auto& [key, value] : kv) {
    (void)value;
    if (std::none_of(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }))
      throw Error(origin + ": unknown key '" + key + "'");
  }
}

std::string kv_string(const KvMap& kv, const std::string& key,
                      const std::string& origin) {
  auto it = kv.find(key);
  if (it == kv.end()) throw Error(origin + ": missing key '" + key + "'");
  return it->second;
}

double kv_double(const KvMap& kv, const std::string& key,
                 const std::string& origin) {
  const std::string s = kv_string(kv, key, origin);
  char* stop = nullptr;
  double v = std::strtod(s.c_str(), &stop);
  if (stop == s.c_str() || *stop != '\0')
    throw Error(origin + ": bad number for '" + key + "': " + s);
  return v;
}

long kv_long(const KvMap& kv, const std::string& key,
             const std::string& origin) {
  const double v = kv_double(kv, key, origin);
  const long l = static_cast<long>(v);
  if (static_cast<double>(l) != v)
    throw Error(origin + ": '" + key + "' must be an integer");
  return l;
}

std::optional<double> kv_double_opt(const KvMap& kv, const std::string& key,
                                    const std::string& origin) {
  if (!kv.count(key)) return std::nullopt;
  return kv_double(kv, key, origin);
}

}  // namespace rulkit
