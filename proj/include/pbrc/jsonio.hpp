#pragma once

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pbrc {

using json = nlohmann::json;

// Canonical serialization used everywhere a digest or byte-compare is taken:
// object keys sorted (nlohmann::json stores objects in a std::map), no
// whitespace, doubles rendered as their shortest round-trip decimal form.
// Re-serializing a parsed canonical string reproduces it byte for byte.
inline std::string canonical_dump(const json& j) { return j.dump(); }

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

inline json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
  }
}

}  // namespace pbrc
