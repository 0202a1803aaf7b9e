#pragma once

#include "pcshap/basis.hpp"
#include "pcshap/error.hpp"
#include "pcshap/galerkin.hpp"
#include "pcshap/models.hpp"
#include "pcshap/monte_carlo.hpp"
#include "pcshap/orthopoly.hpp"
#include "pcshap/parallel.hpp"
#include "pcshap/report.hpp"
#include "pcshap/sensitivity.hpp"
#include "pcshap/surrogate.hpp"
