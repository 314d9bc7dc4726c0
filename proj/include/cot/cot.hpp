// Umbrella header for the correctional-transport library.
#pragma once

#include "cot/estimators.hpp"
#include "cot/harness.hpp"
#include "cot/measure.hpp"
#include "cot/policies.hpp"
#include "cot/report.hpp"
#include "cot/transport.hpp"
