// Copyright 2026 The trustsense Authors.
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

#pragma once

#include "trustsense/dataset.hpp"
#include "trustsense/error.hpp"
#include "trustsense/eval.hpp"
#include "trustsense/lime.hpp"
#include "trustsense/mlp.hpp"
#include "trustsense/random.hpp"
#include "trustsense/rfe.hpp"
#include "trustsense/signal_features.hpp"
#include "trustsense/spectrum.hpp"
#include "trustsense/synth.hpp"
