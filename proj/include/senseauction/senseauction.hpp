#pragma once

#include "senseauction/assignment.hpp"
#include "senseauction/csv.hpp"
#include "senseauction/error.hpp"
#include "senseauction/gridworld.hpp"
#include "senseauction/io.hpp"
#include "senseauction/market.hpp"
#include "senseauction/oracle.hpp"
#include "senseauction/pricing.hpp"
#include "senseauction/properties.hpp"
#include "senseauction/sensing.hpp"
#include "senseauction/simengine.hpp"
