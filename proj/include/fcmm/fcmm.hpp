#pragma once

#include "fcmm/copulas.hpp"
#include "fcmm/dual.hpp"
#include "fcmm/estimate.hpp"
#include "fcmm/harness.hpp"
#include "fcmm/io.hpp"
#include "fcmm/likelihood.hpp"
#include "fcmm/margins.hpp"
#include "fcmm/model.hpp"
#include "fcmm/optimize.hpp"
#include "fcmm/parallel.hpp"
#include "fcmm/predict.hpp"
#include "fcmm/quadrature.hpp"
#include "fcmm/random.hpp"
#include "fcmm/simulate.hpp"
#include "fcmm/special.hpp"
#include "fcmm/splines.hpp"
