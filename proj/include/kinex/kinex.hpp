#pragma once

#include "kinex/errors.hpp"
#include "kinex/kinetic_linear.hpp"
#include "kinex/kinetic_nonlinear.hpp"
#include "kinex/market.hpp"
#include "kinex/meanfield.hpp"
#include "kinex/observables.hpp"
#include "kinex/population.hpp"
#include "kinex/rng.hpp"
#include "kinex/run.hpp"
#include "kinex/scenario.hpp"
