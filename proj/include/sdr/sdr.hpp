#pragma once

// Convenience umbrella: the full strategic doubly robust toolkit.

#include "sdr/baselines.hpp"
#include "sdr/datagen.hpp"
#include "sdr/domain.hpp"
#include "sdr/equilibrium.hpp"
#include "sdr/estimator.hpp"
#include "sdr/harness.hpp"
#include "sdr/nuisance.hpp"
#include "sdr/numerics.hpp"
