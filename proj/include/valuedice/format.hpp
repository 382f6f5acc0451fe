// Copyright 2026 The valuedice-tabular Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VALUEDICE_FORMAT_HPP_
#define VALUEDICE_FORMAT_HPP_

#include <charconv>
#include <string>
#include <system_error>

namespace valuedice {

/// Shortest decimal text that parses back to exactly `x`.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  if (res.ec != std::errc()) return "nan";
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::invalid_argument("not a number: " + text);
  return x;
}

}  // namespace valuedice

#endif  // VALUEDICE_FORMAT_HPP_
