#pragma once

#include "juice/admm.hpp"
#include "juice/baselines.hpp"
#include "juice/common.hpp"
#include "juice/emep.hpp"
#include "juice/gaussian.hpp"
#include "juice/harness.hpp"
#include "juice/metrics.hpp"
#include "juice/model.hpp"
#include "juice/rng.hpp"
