// Copyright 2026 The photocorr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace photocorr {

/// Shortest decimal string that parses back to exactly `value`.
/// Locale-independent; NaN and infinities print as "nan", "inf", "-inf".
std::string format_double(double value);
std::string format_float(float value);

/// Exact inverse of format_double / format_float. Throws InvalidInput on
/// malformed text or trailing characters.
double parse_double(std::string_view text);
float parse_float(std::string_view text);

/// Splits one CSV line on commas (no quoting; none of our files need it).
std::vector<std::string_view> split_csv_line(std::string_view line);

/// Joins fields with commas.
std::string join_csv(const std::vector<std::string>& fields);

}  // namespace photocorr
