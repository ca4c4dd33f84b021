#pragma once

// Flat "key = value" text files, used for loss specifications and
// experiment configs. '#' starts a comment; blank lines are ignored; keys may
// repeat and order is preserved.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace samlab {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::string& path);

  const std::vector<KeyValue>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

  /// Last value for key, if any.
  std::optional<std::string> get(const std::string& key) const;
  std::vector<std::string> get_all(const std::string& key) const;

  [[noreturn]] void fail(const KeyValue& kv, const std::string& message) const;

 private:
  std::string origin_;
  std::vector<KeyValue> entries_;
};

std::string trim(const std::string& s);
double parse_double(const std::string& text);
long long parse_int(const std::string& text);
std::vector<double> parse_doubles(const std::string& text);

}  // namespace samlab
