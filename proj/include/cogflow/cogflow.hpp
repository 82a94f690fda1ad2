#pragma once

// Umbrella header for the cogflow simulation laboratory.

#include "cogflow/breadth.hpp"
#include "cogflow/common.hpp"
#include "cogflow/density.hpp"
#include "cogflow/experiment.hpp"
#include "cogflow/flow.hpp"
#include "cogflow/model.hpp"
#include "cogflow/pdmp.hpp"
#include "cogflow/rng.hpp"
