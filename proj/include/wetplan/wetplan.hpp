#pragma once

#include "wetplan/beamforming.hpp"
#include "wetplan/channel.hpp"
#include "wetplan/eh_model.hpp"
#include "wetplan/errors.hpp"
#include "wetplan/gp_solver.hpp"
#include "wetplan/rng.hpp"
#include "wetplan/scheduler.hpp"
#include "wetplan/sim_harness.hpp"
#include "wetplan/units.hpp"
