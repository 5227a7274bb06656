#pragma once

#include <string>
#include <string_view>

namespace parte {

std::string base64_encode(std::string_view bytes);
/// Standard alphabet with padding; throws ValidationError on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace parte
