#pragma once

#include "tikhonov/core.hpp"
#include "tikhonov/tridiagonal.hpp"
#include "tikhonov/pde1d.hpp"
#include "tikhonov/problems.hpp"
#include "tikhonov/solver.hpp"
#include "tikhonov/rules.hpp"
#include "tikhonov/diagnostics.hpp"
#include "tikhonov/harness.hpp"
#include "tikhonov/config.hpp"
#include "tikhonov/report.hpp"
