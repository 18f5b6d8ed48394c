#pragma once

// Core library: grids, field algebra, estimator, metrics, pipeline, synth.
// The I/O layer (mmorph/io/*, mmorph/cli/*) is included separately; it pulls
// in nlohmann_json and libpng.

#include "mmorph/error.hpp"
#include "mmorph/estimator.hpp"
#include "mmorph/field_ops.hpp"
#include "mmorph/filters.hpp"
#include "mmorph/grid.hpp"
#include "mmorph/lie_algebra.hpp"
#include "mmorph/log.hpp"
#include "mmorph/losses.hpp"
#include "mmorph/parallel.hpp"
#include "mmorph/pipeline.hpp"
#include "mmorph/rng.hpp"
#include "mmorph/synth.hpp"
