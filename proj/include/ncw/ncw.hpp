#pragma once

// Umbrella header for the whole library.

#include "ncw/linalg.hpp"
#include "ncw/qstate.hpp"
#include "ncw/channel.hpp"
#include "ncw/coupling.hpp"
#include "ncw/systems.hpp"
#include "ncw/balance.hpp"
#include "ncw/cost.hpp"
#include "ncw/solver.hpp"
#include "ncw/verify.hpp"
#include "ncw/scenario.hpp"
