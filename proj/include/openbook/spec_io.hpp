// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "openbook/geometry.hpp"

namespace openbook
{

// Strict reader for geometry documents. Unknown keys and type mismatches raise
// Config errors naming the JSON pointer of the offending value.
OpenBookSpec spec_from_json(const nlohmann::json &doc);
OpenBookSpec load_spec(const std::string &path);

// Round-trips a spec with every default filled in (used for provenance).
nlohmann::json spec_to_json(const OpenBookSpec &spec);

nlohmann::json read_json_file(const std::string &path);

// Small helper shared by the geometry and plan readers.
class JsonReader
{
public:
  JsonReader(const nlohmann::json &node, std::string pointer);

  const nlohmann::json &node() const { return node_; }
  const std::string &pointer() const { return pointer_; }

  // Rejects keys outside `allowed`.
  void allow_only(std::initializer_list<const char *> allowed) const;
  bool has(const char *key) const;
  JsonReader child(const char *key) const;
  JsonReader at(std::size_t index) const;
  std::size_t size() const;

  double number(const char *key) const;
  double number(const char *key, double fallback) const;
  int integer(const char *key) const;
  int integer(const char *key, int fallback) const;
  bool boolean(const char *key, bool fallback) const;
  std::string string(const char *key) const;
  std::string string(const char *key, const std::string &fallback) const;
  Vec3 vec3(const char *key) const;
  Vec3 vec3(const char *key, const Vec3 &fallback) const;

  [[noreturn]] void error(const std::string &what) const;
  [[noreturn]] void error(const char *key, const std::string &what) const;

private:
  const nlohmann::json &node_;
  std::string pointer_;
};

}  // namespace openbook
