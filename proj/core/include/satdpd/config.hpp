#pragma once

#include <map>
#include <string>
#include <vector>

namespace satdpd {

/// Flat "key = value" configuration text. Lines starting with '#' (and
/// everything after an unquoted '#') are comments. Values are free text;
/// list-valued keys are whitespace separated. Files can reference other
/// files by path; relative paths resolve against the directory of the
/// file that mentions them (see resolve_path).
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text,
                                     const std::string& origin_dir = ".");

  bool has(const std::string& key) const;

  std::string get_str(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& def) const;
  double get_real(const std::string& key) const;
  double get_real(const std::string& key, double def) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int def) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_real_list(const std::string& key) const;
  std::vector<std::string> get_str_list(const std::string& key) const;

  /// Resolve a (possibly relative) path against this config's directory.
  std::string resolve_path(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
  std::string dir_ = ".";
};

}  // namespace satdpd
