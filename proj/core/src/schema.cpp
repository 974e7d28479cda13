#include "tea/schema.hpp"

#include "tea/errors.hpp"

namespace tea {

using nlohmann::json;

namespace {

bool type_matches(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  throw ValueError("schema: unsupported type '" + t + "'");
}

void check(const json& v, const json& schema, const std::string& where,
           std::vector<std::string>& out) {
  if (!schema.is_object()) throw ValueError("schema: every schema node must be an object");

  if (auto it = schema.find("type"); it != schema.end()) {
    if (!type_matches(v, it->get<std::string>())) {
      out.push_back(where + ": expected " + it->get<std::string>() + ", got " +
                    v.type_name());
      return;  // nothing below applies to the wrong type
    }
  }
  if (auto it = schema.find("enum"); it != schema.end()) {
    bool hit = false;
    for (const json& cand : *it)
      if (cand == v) {
        hit = true;
        break;
      }
    if (!hit) out.push_back(where + ": value " + v.dump() + " not in enum");
  }
  if (auto it = schema.find("minimum"); it != schema.end()) {
    if (v.is_number() && v.get<double>() < it->get<double>())
      out.push_back(where + ": " + v.dump() + " below minimum " + it->dump());
  }
  if (auto it = schema.find("required"); it != schema.end()) {
    for (const json& key : *it)
      if (!v.is_object() || !v.contains(key.get<std::string>()))
        out.push_back(where + ": missing required key '" + key.get<std::string>() + "'");
  }
  if (auto it = schema.find("properties"); it != schema.end() && v.is_object()) {
    for (auto p = it->begin(); p != it->end(); ++p)
      if (v.contains(p.key())) check(v.at(p.key()), p.value(), where + "." + p.key(), out);
  }
  if (auto it = schema.find("items"); it != schema.end() && v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i)
      check(v[i], *it, where + "[" + std::to_string(i) + "]", out);
  }
}

}  // namespace

std::vector<std::string> schema_validate(const json& value, const json& schema) {
  std::vector<std::string> out;
  check(value, schema, "$", out);
  return out;
}

std::vector<std::string> schema_validate_text(const std::string& value_text,
                                              const std::string& schema_text) {
  json v, s;
  try {
    v = json::parse(value_text);
  } catch (const json::parse_error& e) {
    return {std::string("$: value is not valid JSON: ") + e.what()};
  }
  try {
    s = json::parse(schema_text);
  } catch (const json::parse_error& e) {
    throw ValueError(std::string("schema: schema text is not valid JSON: ") + e.what());
  }
  return schema_validate(v, s);
}

}  // namespace tea
