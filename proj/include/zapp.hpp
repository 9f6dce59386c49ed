// Copyright 2026 The ZAPP Authors
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

#include "zapp/config.hpp"
#include "zapp/constraints.hpp"
#include "zapp/dynamics.hpp"
#include "zapp/error.hpp"
#include "zapp/experiment.hpp"
#include "zapp/io.hpp"
#include "zapp/planner.hpp"
#include "zapp/predictor.hpp"
#include "zapp/reachset.hpp"
#include "zapp/simulator.hpp"
#include "zapp/solver.hpp"
#include "zapp/stats.hpp"
#include "zapp/zonotope.hpp"
