#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace cl3d {

// Flat dotted-key configuration: one `section.key = value` per line, `#`
// comments. Every key a reader touches is registered; unknown keys are
// rejected by name so typos in files or --override flags cannot pass
// silently.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  // "key=value"; later overrides win over file values
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;

  // Typed getters; the default is recorded so the resolved snapshot lists
  // every key the run consulted.
  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  long long get_int64(const std::string& key, long long def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& def) const;

  // Throws Error("unknown-key", ...) naming the first key no reader consumed.
  void reject_unknown_keys() const;

  // Full resolved view (file values, overrides, and consulted defaults),
  // serialized as a loadable config file with sorted keys.
  std::string resolved_text() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::string raw(const std::string& key, const std::string& def) const;

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> resolved_;
  mutable std::set<std::string> consumed_;
};

}  // namespace cl3d
