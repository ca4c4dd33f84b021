#include "samlab/kvfile.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace samlab {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile f;
  f.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    KeyValue kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
    if (kv.key.empty()) throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
    f.entries_.push_back(std::move(kv));
  }
  return f;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  std::optional<std::string> out;
  for (const auto& kv : entries_)
    if (kv.key == key) out = kv.value;
  return out;
}

std::vector<std::string> KeyValueFile::get_all(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& kv : entries_)
    if (kv.key == key) out.push_back(kv.value);
  return out;
}

void KeyValueFile::fail(const KeyValue& kv, const std::string& message) const {
  throw ParseError(origin_ + ":" + std::to_string(kv.line) + ": " + kv.key + ": " + message);
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw ParseError("not a number: '" + text + "'");
  }
  return v;
}

long long parse_int(const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  // Accept scientific notation for step counts such as 5e6.
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || v != static_cast<double>(static_cast<long long>(v))) {
    throw ParseError("not an integer: '" + text + "'");
  }
  return static_cast<long long>(v);
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::string s = text;
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok));
  return out;
}

}  // namespace samlab
