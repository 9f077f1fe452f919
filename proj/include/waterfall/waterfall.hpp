#pragma once

// Umbrella header: the whole waterfall optimization toolkit.

#include "core.hpp"
#include "evaluate.hpp"
#include "ingest.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "search.hpp"
#include "simulate.hpp"
#include "synthetic.hpp"
#include "valuation.hpp"
