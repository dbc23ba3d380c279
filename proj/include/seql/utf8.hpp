#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace seql::utf8 {

// Decodes UTF-8 into Unicode scalar values. Throws seql::Error on malformed
// input (overlong forms, surrogates, truncated sequences).
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view scalars);

void append(std::string& out, char32_t scalar);

bool is_valid(std::string_view text);

}  // namespace seql::utf8
