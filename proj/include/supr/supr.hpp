#pragma once

// Superiorization of feasibility-seeking algorithms with pluggable
// nonascent oracles, plus the fan-beam CT / total-variation experiment
// stack built on top of it.

#include "supr/art.hpp"
#include "supr/engine.hpp"
#include "supr/experiment.hpp"
#include "supr/image.hpp"
#include "supr/schedule.hpp"
#include "supr/system_matrix.hpp"
#include "supr/tomography.hpp"
#include "supr/tv_perturbations.hpp"
