#include "ietlab/io.hpp"

#include "ietlab/error.hpp"

namespace ietlab {

namespace {

template <class T>
std::vector<T> array_field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(Errc::InvalidArgument, std::string("missing field '") + key + "'");
  const json& v = j.at(key);
  if (!v.is_array()) throw Error(Errc::InvalidArgument, std::string("field '") + key + "' must be an array");
  std::vector<T> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw Error(Errc::InvalidArgument, std::string("field '") + key + "' must hold numbers");
    if constexpr (std::is_integral_v<T>) {
      if (!e.is_number_integer()) throw Error(Errc::InvalidArgument, std::string("field '") + key + "' must hold integers");
    }
    out.push_back(e.get<T>());
  }
  return out;
}

}  // namespace

json to_json(const Iet& t) {
  return {{"lengths", std::vector<double>(t.lengths().begin(), t.lengths().end())}, {"perm", t.perm_one_based()}};
}

json to_json(const PiecewiseFunction& f) {
  return {{"a", std::vector<double>(f.a().begin(), f.a().end())}, {"b", std::vector<double>(f.b().begin(), f.b().end())}};
}

json to_json(const Suspension& s) {
  json j = to_json(s.base());
  j["tau"] = std::vector<double>(s.tau().begin(), s.tau().end());
  j["heights"] = std::vector<double>(s.heights().begin(), s.heights().end());
  return j;
}

Iet iet_from_json(const json& j) {
  const auto lengths = array_field<double>(j, "lengths");
  const auto perm = array_field<int>(j, "perm");
  return Iet::make(lengths, perm);
}

PiecewiseFunction function_from_json(const json& j) {
  return PiecewiseFunction(array_field<double>(j, "a"), array_field<double>(j, "b"));
}

Suspension suspension_from_json(const json& j) {
  const Iet base = iet_from_json(j);
  auto heights = array_field<double>(j, "heights");
  std::optional<std::vector<double>> tau;
  if (j.contains("tau") && !j.at("tau").is_null()) {
    auto t = array_field<double>(j, "tau");
    if (!t.empty()) tau = std::move(t);
  }
  return Suspension::make(base, std::move(heights), std::move(tau));
}

}  // namespace ietlab
