#pragma once

#include "wsnest/app.hpp"
#include "wsnest/baselines.hpp"
#include "wsnest/bounds.hpp"
#include "wsnest/channel.hpp"
#include "wsnest/config.hpp"
#include "wsnest/errors.hpp"
#include "wsnest/filter.hpp"
#include "wsnest/signal.hpp"
#include "wsnest/sim.hpp"
#include "wsnest/thresholds.hpp"
#include "wsnest/topology.hpp"
#include "wsnest/version.hpp"
