#pragma once

#include "tphd/app.hpp"
#include "tphd/assignment.hpp"
#include "tphd/config.hpp"
#include "tphd/error.hpp"
#include "tphd/filter.hpp"
#include "tphd/frame.hpp"
#include "tphd/io.hpp"
#include "tphd/metrics.hpp"
#include "tphd/models.hpp"
#include "tphd/monte_carlo.hpp"
#include "tphd/numeric.hpp"
#include "tphd/random.hpp"
#include "tphd/simulator.hpp"
#include "tphd/trajectory.hpp"
