#pragma once

// Small helpers for reading JSON documents with field-path error messages.
// Internal to the library; shared by the grid and scenario-config loaders.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "voltlab/errors.hpp"

namespace voltlab {

std::string read_text_file(const std::filesystem::path& path);

// Parses JSON (comments allowed). Errors report line and column.
nlohmann::json parse_json_document(std::string_view document, std::string_view what);

namespace detail {

class FieldReader {
 public:
  FieldReader(const nlohmann::json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ParseError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return node_.contains(key) && !node_.at(key).is_null(); }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ParseError(path_ + "." + key + ": " + what);
  }

  const nlohmann::json& at(const char* key) const {
    if (!has(key)) fail(key, "missing required field");
    return node_.at(key);
  }

  double number(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }
  double number_or(const char* key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::int64_t integer(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer_or(const char* key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  bool boolean_or(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key) const {
    const auto& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }
  std::string string_or(const char* key, std::string fallback) const {
    return has(key) ? string(key) : std::move(fallback);
  }

  std::vector<std::pair<size_t, nlohmann::json>> array(const char* key) const {
    const auto& v = at(key);
    if (!v.is_array()) fail(key, "expected an array");
    std::vector<std::pair<size_t, nlohmann::json>> out;
    for (size_t i = 0; i < v.size(); ++i) out.emplace_back(i, v[i]);
    return out;
  }

  std::vector<int> int_list(const char* key) const {
    std::vector<int> out;
    for (const auto& [i, item] : array(key)) {
      if (!item.is_number_integer())
        throw ParseError(path_ + "." + key + "[" + std::to_string(i) + "]: expected an integer");
      out.push_back(item.get<int>());
    }
    return out;
  }

  FieldReader child(const char* key) const { return FieldReader(at(key), path_ + "." + key); }

  const std::string& path() const { return path_; }

 private:
  const nlohmann::json& node_;
  std::string path_;
};

}  // namespace detail
}  // namespace voltlab
