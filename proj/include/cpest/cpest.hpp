#pragma once

#include "cpest/power_curve.hpp"
#include "cpest/parameter_maps.hpp"
#include "cpest/z_dynamics.hpp"
#include "cpest/rng.hpp"
#include "cpest/plant.hpp"
#include "cpest/regressor.hpp"
#include "cpest/estimator.hpp"
#include "cpest/oracles.hpp"
#include "cpest/csv.hpp"
#include "cpest/scenario.hpp"
#include "cpest/pipeline.hpp"
#include "cpest/harness.hpp"
#include "cpest/verify.hpp"
