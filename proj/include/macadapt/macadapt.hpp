#pragma once

#include "macadapt/errors.hpp"
#include "macadapt/numeric.hpp"
#include "macadapt/rng.hpp"
#include "macadapt/fading.hpp"
#include "macadapt/mac.hpp"
#include "macadapt/lp.hpp"
#include "macadapt/alloc_discrete.hpp"
#include "macadapt/alloc_continuous.hpp"
#include "macadapt/verify.hpp"
#include "macadapt/weighted_region.hpp"
#include "macadapt/power_control.hpp"
#include "macadapt/partial_csi.hpp"
#include "macadapt/io.hpp"
#include "macadapt/cli.hpp"
