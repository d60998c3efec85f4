#include "satdpd/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace satdpd {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  std::size_t a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

std::string dir_of(const std::string& path) {
  std::size_t p = path.find_last_of('/');
  if (p == std::string::npos) return ".";
  if (p == 0) return "/";
  return path.substr(0, p);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), dir_of(path));
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text,
                                            const std::string& origin_dir) {
  KeyValueConfig cfg;
  cfg.dir_ = origin_dir;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected 'key = value', got: " + line);
    }
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": empty key");
    }
    cfg.kv_[key] = val;
  }
  return cfg;
}

bool KeyValueConfig::has(const std::string& key) const {
  return kv_.count(key) != 0;
}

std::string KeyValueConfig::get_str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw std::runtime_error("missing config key: " + key);
  return it->second;
}

std::string KeyValueConfig::get_str(const std::string& key,
                                    const std::string& def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

double KeyValueConfig::get_real(const std::string& key) const {
  const std::string v = get_str(key);
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    throw std::runtime_error("config key '" + key + "': not a number: " + v);
  }
  return x;
}

double KeyValueConfig::get_real(const std::string& key, double def) const {
  return has(key) ? get_real(key) : def;
}

int KeyValueConfig::get_int(const std::string& key) const {
  double x = get_real(key);
  int i = static_cast<int>(x);
  if (static_cast<double>(i) != x) {
    throw std::runtime_error("config key '" + key + "': not an integer");
  }
  return i;
}

int KeyValueConfig::get_int(const std::string& key, int def) const {
  return has(key) ? get_int(key) : def;
}

bool KeyValueConfig::get_bool(const std::string& key) const {
  std::string v = get_str(key);
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw std::runtime_error("config key '" + key + "': not a boolean: " + v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
  return has(key) ? get_bool(key) : def;
}

std::vector<double> KeyValueConfig::get_real_list(
    const std::string& key) const {
  std::istringstream in(get_str(key));
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    double x = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
      throw std::runtime_error("config key '" + key +
                               "': not a number in list: " + tok);
    }
    out.push_back(x);
  }
  return out;
}

std::vector<std::string> KeyValueConfig::get_str_list(
    const std::string& key) const {
  std::istringstream in(get_str(key));
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string KeyValueConfig::resolve_path(const std::string& path) const {
  if (path.empty() || path[0] == '/') return path;
  return dir_ + "/" + path;
}

}  // namespace satdpd
