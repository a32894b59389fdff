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

// JSON readers for detector and network specs, shared by the experiment
// runner. Internal.

#pragma once

#include <string>

#include "json_util.hpp"
#include "photocorr/detection.hpp"

namespace photocorr::detail {

/// {"kind": "click" | "pnr", "efficiency": .., "dark_count": ..}; every key
/// optional (click, 1, 0).
DetectorModel detector_from_json_value(const Json& j, const std::string& path);

NetworkSpec network_spec_from_json_value(const Json& j, const std::string& path);

}  // namespace photocorr::detail
