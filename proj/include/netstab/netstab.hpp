/*
 Copyright 2026 netstab contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include "netstab/channel.hpp"
#include "netstab/dynamics.hpp"
#include "netstab/io.hpp"
#include "netstab/limits.hpp"
#include "netstab/lyapunov.hpp"
#include "netstab/riccati.hpp"
#include "netstab/simulate.hpp"

namespace netstab {
inline constexpr const char* kVersion = "0.1.0";
}
