#pragma once

// Everything in one include.

#include "fracvol/errors.hpp"
#include "fracvol/numerics.hpp"
#include "fracvol/parallel.hpp"
#include "fracvol/rng.hpp"
#include "fracvol/grid.hpp"
#include "fracvol/fbm.hpp"
#include "fracvol/kernel.hpp"
#include "fracvol/vol_model.hpp"
#include "fracvol/market_sim.hpp"
#include "fracvol/option.hpp"
#include "fracvol/measure_lab.hpp"
#include "fracvol/pricing.hpp"
#include "fracvol/stats.hpp"
#include "fracvol/io.hpp"
#include "fracvol/config.hpp"
#include "fracvol/cli.hpp"
