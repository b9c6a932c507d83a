#pragma once

// Umbrella header.

#include "qgmm/diagnostics.hpp"
#include "qgmm/errors.hpp"
#include "qgmm/experiment.hpp"
#include "qgmm/io.hpp"
#include "qgmm/kernel.hpp"
#include "qgmm/linalg.hpp"
#include "qgmm/moment_model.hpp"
#include "qgmm/prior.hpp"
#include "qgmm/random.hpp"
#include "qgmm/samplers.hpp"
#include "qgmm/synth.hpp"
