#pragma once

#include "regdiv/analytics.hpp"
#include "regdiv/band.hpp"
#include "regdiv/error.hpp"
#include "regdiv/fixedpoint.hpp"
#include "regdiv/grid_function.hpp"
#include "regdiv/io.hpp"
#include "regdiv/liquidation.hpp"
#include "regdiv/model.hpp"
#include "regdiv/montecarlo.hpp"
#include "regdiv/quartic.hpp"
#include "regdiv/solver.hpp"
#include "regdiv/two_regime.hpp"
