#pragma once

#include "rulkit/common.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace rulkit {

// Line-oriented key=value files: one pair per line, '#' starts a comment,
// whitespace around keys and values is ignored.
using KvMap = std::map<std::string, std::string>;

KvMap read_kv_file(const std::filesystem::path& file);
KvMap parse_kv_text(const std::string& text, const std::string& origin);

// Rejects keys outside `known` (helps catch typos in config files).
void reject_unknown_keys(const KvMap& kv,
                         std::initializer_list<const char*> known,
                         const std::string& origin);

double kv_double(const KvMap& kv, const std::string& key,
                 const std::string& origin);
long kv_long(const KvMap& kv, const std::string& key,
             const std::string& origin);
std::string kv_string(const KvMap& kv, const std::string& key,
                      const std::string& origin);

std::optional<double> kv_double_opt(const KvMap& kv, const std::string& key,
                                    const std::string& origin);

}  // namespace rulkit
