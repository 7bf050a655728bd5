#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace waterline {

/// One parsed record plus the 1-based line it came from.
struct NdjsonRecord {
  std::size_t line = 0;
  nlohmann::json value;
};

/// Reads newline-delimited JSON; blank lines are skipped. Throws kIoError if
/// the file cannot be opened and kSchemaViolation on a malformed line.
std::vector<NdjsonRecord> read_ndjson(const std::filesystem::path& path);
std::vector<NdjsonRecord> parse_ndjson(std::istream& in, const std::string& source);

void write_ndjson(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

/// Field accessors that raise kSchemaViolation naming the source location.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& object, std::string where);

  std::string string(const char* key) const;
  double number(const char* key) const;
  std::int64_t integer(const char* key) const;
  bool boolean(const char* key) const;
  const nlohmann::json& array(const char* key) const;
  bool has(const char* key) const { return object_.contains(key); }

  [[noreturn]] void fail(const std::string& message) const;

 private:
  const nlohmann::json& field(const char* key) const;

  const nlohmann::json& object_;
  std::string where_;
};

}  // namespace waterline
