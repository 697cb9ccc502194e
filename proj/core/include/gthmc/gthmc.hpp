#pragma once

#include "gthmc/types.hpp"
#include "gthmc/targets.hpp"
#include "gthmc/metrics.hpp"
#include "gthmc/integrators.hpp"
#include "gthmc/samplers.hpp"
#include "gthmc/tuning.hpp"
#include "gthmc/diagnostics.hpp"
