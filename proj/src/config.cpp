#include "cl3d/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cl3d/error.hpp"

namespace cl3d {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config-not-found", path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config-parse", "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw Error("config-parse", "line " + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = val;
  }
  return cfg;
}

void KeyValueConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error("bad-override", assignment);
  const std::string key = trim(assignment.substr(0, eq));
  const std::string val = trim(assignment.substr(eq + 1));
  if (key.empty()) throw Error("bad-override", assignment);
  values_[key] = val;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueConfig::raw(const std::string& key, const std::string& def) const {
  consumed_.insert(key);
  auto it = values_.find(key);
  const std::string v = (it == values_.end()) ? def : it->second;
  resolved_[key] = v;
  return v;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& def) const {
  return raw(key, def);
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
  const std::string v = raw(key, std::to_string(def));
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') throw Error("bad-value", key + " = " + v);
  return x;
}

int KeyValueConfig::get_int(const std::string& key, int def) const {
  return static_cast<int>(get_int64(key, def));
}

long long KeyValueConfig::get_int64(const std::string& key, long long def) const {
  const std::string v = raw(key, std::to_string(def));
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') throw Error("bad-value", key + " = " + v);
  return x;
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
  const std::string v = raw(key, def ? "true" : "false");
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("bad-value", key + " = " + v);
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    const std::vector<double>& def) const {
  std::string d;
  for (std::size_t i = 0; i < def.size(); ++i) d += (i ? "," : "") + std::to_string(def[i]);
  const std::string v = raw(key, d);
  std::vector<double> out;
  std::istringstream in(v);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    char* end = nullptr;
    const double x = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw Error("bad-value", key + " = " + v);
    out.push_back(x);
  }
  return out;
}

void KeyValueConfig::reject_unknown_keys() const {
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) throw Error("unknown-key", key);
  }
}

std::string KeyValueConfig::resolved_text() const {
  std::ostringstream out;
  for (const auto& [key, value] : resolved_) out << key << " = " << value << "\n";
  return out.str();
}

}  // namespace cl3d
