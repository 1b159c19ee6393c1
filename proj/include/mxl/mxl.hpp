#pragma once

#include "mxl/errors.hpp"
#include "mxl/hermlin.hpp"
#include "mxl/objective.hpp"
#include "mxl/channel.hpp"
#include "mxl/learner.hpp"
#include "mxl/hindsight.hpp"
#include "mxl/scenario.hpp"
#include "mxl/simulation.hpp"
#include "mxl/metrics_io.hpp"
#include "mxl/selftest.hpp"
