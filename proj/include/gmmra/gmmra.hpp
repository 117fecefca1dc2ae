#pragma once

#include "gmmra/bench.hpp"
#include "gmmra/errors.hpp"
#include "gmmra/estimators.hpp"
#include "gmmra/linalg.hpp"
#include "gmmra/metrics.hpp"
#include "gmmra/moment_engine.hpp"
#include "gmmra/moment_function.hpp"
#include "gmmra/moment_index.hpp"
#include "gmmra/mra_model.hpp"
#include "gmmra/observation_io.hpp"
#include "gmmra/optimizer.hpp"
#include "gmmra/param.hpp"
#include "gmmra/rng.hpp"
