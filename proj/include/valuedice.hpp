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

// Umbrella header.

#ifndef VALUEDICE_VALUEDICE_HPP_
#define VALUEDICE_VALUEDICE_HPP_

#include "valuedice/baselines.hpp"
#include "valuedice/divergence.hpp"
#include "valuedice/empirical.hpp"
#include "valuedice/environments.hpp"
#include "valuedice/errors.hpp"
#include "valuedice/format.hpp"
#include "valuedice/harness.hpp"
#include "valuedice/mdp.hpp"
#include "valuedice/objective.hpp"
#include "valuedice/trainer.hpp"

#endif  // VALUEDICE_VALUEDICE_HPP_
