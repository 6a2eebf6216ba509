// Copyright 2026 The tomd Authors
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

// Umbrella header for the core library. The HTTP annotation service lives
// in tomd/annotation_service.hpp and pulls in cpp-httplib.

#pragma once

#include "tomd/chromaticity_fusion.hpp"
#include "tomd/dataset.hpp"
#include "tomd/depth_completion.hpp"
#include "tomd/error.hpp"
#include "tomd/evaluation.hpp"
#include "tomd/frame_data.hpp"
#include "tomd/geometry.hpp"
#include "tomd/grid.hpp"
#include "tomd/image_io.hpp"
#include "tomd/metrics.hpp"
#include "tomd/nn/dcm.hpp"
#include "tomd/nn/layers.hpp"
#include "tomd/nn/network.hpp"
#include "tomd/nn/normalization.hpp"
#include "tomd/nn/parameters.hpp"
#include "tomd/nn/train.hpp"
#include "tomd/nn/weights_io.hpp"
#include "tomd/random.hpp"
#include "tomd/slic.hpp"
#include "tomd/synthetic.hpp"
