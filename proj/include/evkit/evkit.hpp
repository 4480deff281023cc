#pragma once

#include "evkit/config.hpp"
#include "evkit/cond.hpp"
#include "evkit/core.hpp"
#include "evkit/diffusion.hpp"
#include "evkit/interp.hpp"
#include "evkit/io.hpp"
#include "evkit/report.hpp"
#include "evkit/rng.hpp"
#include "evkit/sim.hpp"
#include "evkit/voxel.hpp"
