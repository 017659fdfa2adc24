#pragma once

#include "dyncool/errors.hpp"
#include "dyncool/experiments.hpp"
#include "dyncool/fock.hpp"
#include "dyncool/integrator.hpp"
#include "dyncool/io.hpp"
#include "dyncool/limits.hpp"
#include "dyncool/metrics.hpp"
#include "dyncool/moments.hpp"
#include "dyncool/params.hpp"
#include "dyncool/pulses.hpp"
#include "dyncool/schedule.hpp"
