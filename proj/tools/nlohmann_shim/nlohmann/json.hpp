#pragma once
// maps the conventional include path onto the vendored single header
#include <json.hpp>
