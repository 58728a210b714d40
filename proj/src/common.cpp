// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "srpo/common.hpp"

#include <charconv>
#include <cstdio>

namespace srpo {

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t from_hex(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IntegrityError("malformed hex value: " + std::string(s));
  }
  return v;
}

}  // namespace srpo
