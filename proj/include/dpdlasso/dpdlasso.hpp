#pragma once

#include "dpdlasso/error.hpp"
#include "dpdlasso/stats.hpp"
#include "dpdlasso/weights.hpp"
#include "dpdlasso/types.hpp"
#include "dpdlasso/dpd_loss.hpp"
#include "dpdlasso/wlasso.hpp"
#include "dpdlasso/mm_fit.hpp"
#include "dpdlasso/selection.hpp"
#include "dpdlasso/diagnostics.hpp"
#include "dpdlasso/random.hpp"
#include "dpdlasso/parallel.hpp"
#include "dpdlasso/simulation.hpp"
