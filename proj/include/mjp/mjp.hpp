/*
 * Copyright 2026 The mjpgibbs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "mjp/error.hpp"
#include "mjp/random.hpp"
#include "mjp/rates.hpp"
#include "mjp/lotka_volterra.hpp"
#include "mjp/trajectory.hpp"
#include "mjp/initial.hpp"
#include "mjp/policy.hpp"
#include "mjp/simulate.hpp"
#include "mjp/density.hpp"
#include "mjp/observation.hpp"
#include "mjp/smc.hpp"
#include "mjp/ctbn.hpp"
#include "mjp/diagnostics.hpp"
#include "mjp/mcmc.hpp"
#include "mjp/presets.hpp"
#include "mjp/io.hpp"
