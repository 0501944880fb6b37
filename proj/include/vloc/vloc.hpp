#pragma once

#include "vloc/error.hpp"
#include "vloc/random.hpp"
#include "vloc/geometry.hpp"
#include "vloc/model.hpp"
#include "vloc/scene_synth.hpp"
#include "vloc/structure_detect.hpp"
#include "vloc/compression.hpp"
#include "vloc/matching.hpp"
#include "vloc/pose_estimation.hpp"
#include "vloc/model_pool.hpp"
#include "vloc/tracking.hpp"
#include "vloc/serialization.hpp"
#include "vloc/benchmark.hpp"
#include "vloc/config_io.hpp"
