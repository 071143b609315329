#pragma once

#include "anomaly.hpp"
#include "bench.hpp"
#include "changepoint.hpp"
#include "core.hpp"
#include "io.hpp"
#include "pipeline.hpp"
#include "seasonal.hpp"
#include "smoothing.hpp"
#include "synthetic.hpp"
