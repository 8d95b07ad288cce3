#pragma once

// Umbrella header.

#include "snse/config.hpp"
#include "snse/diagnostics.hpp"
#include "snse/error.hpp"
#include "snse/experiment.hpp"
#include "snse/grid.hpp"
#include "snse/harmonics.hpp"
#include "snse/noise.hpp"
#include "snse/operators.hpp"
#include "snse/ou.hpp"
#include "snse/snapshot.hpp"
#include "snse/solver.hpp"
#include "snse/spectral_field.hpp"
