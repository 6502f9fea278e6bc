#pragma once

#include "pkbd/densities.hpp"
#include "pkbd/em.hpp"
#include "pkbd/errors.hpp"
#include "pkbd/experiments.hpp"
#include "pkbd/io.hpp"
#include "pkbd/metrics.hpp"
#include "pkbd/model_selection.hpp"
#include "pkbd/random.hpp"
#include "pkbd/samplers.hpp"
#include "pkbd/special.hpp"
#include "pkbd/sphere.hpp"
#include "pkbd/synth.hpp"
