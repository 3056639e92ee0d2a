#pragma once

#include <string>

namespace pupinet {

enum class Direction { OctToOcta, OctaToOct };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

}  // namespace pupinet
