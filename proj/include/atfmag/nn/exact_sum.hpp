// Copyright 2026 The atfmag Authors
// SPDX-License-Identifier: Apache-2.0
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

#include <span>

namespace atfmag::nn {

/// Correctly rounded sum of finite doubles (Shewchuk's exact partials, with
/// the round-half-even fix-up used by Python's math.fsum). The result does
/// not depend on the order of the inputs.
double exact_sum(std::span<const double> values);

}  // namespace atfmag::nn
