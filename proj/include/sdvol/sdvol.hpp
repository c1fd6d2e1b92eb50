#pragma once

#include "sdvol/analytic.hpp"
#include "sdvol/config.hpp"
#include "sdvol/csv.hpp"
#include "sdvol/errors.hpp"
#include "sdvol/extrema.hpp"
#include "sdvol/function_spec.hpp"
#include "sdvol/grid.hpp"
#include "sdvol/quadrature.hpp"
#include "sdvol/rng.hpp"
#include "sdvol/roots.hpp"
#include "sdvol/runner.hpp"
#include "sdvol/scenario.hpp"
#include "sdvol/sde_engine.hpp"
#include "sdvol/stats.hpp"
#include "sdvol/supply_demand.hpp"
#include "sdvol/validation.hpp"
