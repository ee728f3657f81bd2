#pragma once

#include "drmatch/diagnostics.hpp"
#include "drmatch/estimators.hpp"
#include "drmatch/lasso.hpp"
#include "drmatch/linalg.hpp"
#include "drmatch/matching.hpp"
#include "drmatch/report.hpp"
#include "drmatch/rng.hpp"
#include "drmatch/scores.hpp"
#include "drmatch/simulation.hpp"
#include "drmatch/types.hpp"
