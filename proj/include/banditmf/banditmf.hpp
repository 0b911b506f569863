/*
 * Copyright 2026 The BanditMF Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Umbrella header for the library (the CLI front end lives in cli.hpp).

#include "banditmf/bandit.hpp"
#include "banditmf/clustering.hpp"
#include "banditmf/common.hpp"
#include "banditmf/config.hpp"
#include "banditmf/dataset.hpp"
#include "banditmf/linucb.hpp"
#include "banditmf/mf.hpp"
#include "banditmf/neighborhood.hpp"
#include "banditmf/pipeline.hpp"
#include "banditmf/report.hpp"
#include "banditmf/synthetic.hpp"
