#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "uacnn/error.hpp"
#include "uacnn/moment_tensor.hpp"

namespace uacnn {

using Json = nlohmann::json;

/// Parse JSON text; syntax errors carry the byte offset reported by the parser.
inline Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::Parse, "malformed JSON at byte " + std::to_string(e.byte) +
                               " (" + e.what() + ")");
  }
}

namespace json_detail {

inline const Json& require(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::Parse, where + " must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorKind::Parse, where + " is missing \"" + key + "\"");
  return *it;
}

inline std::size_t as_size(const Json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    fail(ErrorKind::Parse, where + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline double as_real(const Json& v, const std::string& where) {
  if (!v.is_number()) fail(ErrorKind::Parse, where + " must be a number");
  return v.get<double>();
}

inline std::vector<double> as_reals(const Json& v, const std::string& where) {
  if (!v.is_array()) fail(ErrorKind::Parse, where + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(as_real(x, where));
  return out;
}

inline Shape as_shape(const Json& v, const std::string& where) {
  if (!v.is_array()) fail(ErrorKind::Parse, where + " must be an array of sizes");
  Shape out;
  for (const auto& x : v) out.push_back(as_size(x, where));
  return out;
}

}  // namespace json_detail

/// {"shape":[...], "means":[...], "variances":[...]}, flat arrays row-major.
inline Json to_json(const MomentTensor& t) {
  return Json{{"shape", t.shape()},
              {"means", std::vector<double>(t.means().begin(), t.means().end())},
              {"variances",
               std::vector<double>(t.variances().begin(), t.variances().end())}};
}

inline MomentTensor moment_tensor_from_json(const Json& doc) {
  using namespace json_detail;
  const std::string where = "moment tensor";
  return make_moment_tensor(as_shape(require(doc, "shape", where), where + ".shape"),
                            as_reals(require(doc, "means", where), where + ".means"),
                            as_reals(require(doc, "variances", where), where + ".variances"));
}

inline MomentTensor load_moment_tensor(std::string_view text) {
  return moment_tensor_from_json(parse_json(text));
}

}  // namespace uacnn
