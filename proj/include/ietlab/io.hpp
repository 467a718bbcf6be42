#pragma once

#include <json.hpp>

#include "ietlab/iet.hpp"
#include "ietlab/suspension.hpp"

namespace ietlab {

using json = nlohmann::json;

/// {"lengths": [...], "perm": [...]} with a one-based perm.
json to_json(const Iet& t);
/// {"a": [...], "b": [...]}
json to_json(const PiecewiseFunction& f);
/// {"lengths", "perm", "tau", "heights"}; tau is [] when the suspension has none.
json to_json(const Suspension& s);

/// Malformed documents raise InvalidArgument; bad values raise the library's
/// usual errors (NonPositiveLength, InvalidPermutation, ...).
Iet iet_from_json(const json& j);
PiecewiseFunction function_from_json(const json& j);
/// Heights are kept as written; tau is validated when present and nonempty.
Suspension suspension_from_json(const json& j);

}  // namespace ietlab
