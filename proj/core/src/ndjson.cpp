#include "waterline/ndjson.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "waterline/error.hpp"

namespace waterline {

std::vector<NdjsonRecord> parse_ndjson(std::istream& in, const std::string& source) {
  std::vector<NdjsonRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back({line, nlohmann::json::parse(text)});
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kSchemaViolation,
                  source + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return records;
}

std::vector<NdjsonRecord> read_ndjson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  return parse_ndjson(in, path.string());
}

void write_ndjson(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

FieldReader::FieldReader(const nlohmann::json& object, std::string where)
    : object_(object), where_(std::move(where)) {
  if (!object_.is_object()) fail("record must be a JSON object");
}

void FieldReader::fail(const std::string& message) const {
  throw Error(ErrorCode::kSchemaViolation, where_ + ": " + message);
}

const nlohmann::json& FieldReader::field(const char* key) const {
  auto it = object_.find(key);
  if (it == object_.end()) fail(std::string("missing field '") + key + "'");
  return *it;
}

std::string FieldReader::string(const char* key) const {
  const auto& v = field(key);
  if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

double FieldReader::number(const char* key) const {
  const auto& v = field(key);
  if (!v.is_number()) fail(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(std::string("field '") + key + "' must be finite");
  return d;
}

std::int64_t FieldReader::integer(const char* key) const {
  const auto& v = field(key);
  if (!v.is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

bool FieldReader::boolean(const char* key) const {
  const auto& v = field(key);
  if (!v.is_boolean()) fail(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

const nlohmann::json& FieldReader::array(const char* key) const {
  const auto& v = field(key);
  if (!v.is_array()) fail(std::string("field '") + key + "' must be an array");
  return v;
}

}  // namespace waterline
