// SPDX-License-Identifier: MIT
#pragma once

namespace tenfactor {

inline constexpr const char* k_version = "0.1.0";

}  // namespace tenfactor
