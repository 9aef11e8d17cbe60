#pragma once

#include "weakdep/error.hpp"
#include "weakdep/rational.hpp"
#include "weakdep/stats.hpp"
#include "weakdep/rng.hpp"
#include "weakdep/parallel.hpp"
#include "weakdep/json_io.hpp"
#include "weakdep/process_spec.hpp"
#include "weakdep/fft.hpp"
#include "weakdep/simulate.hpp"
#include "weakdep/dependence.hpp"
#include "weakdep/lindeberg.hpp"
#include "weakdep/resample.hpp"
#include "weakdep/kde.hpp"
#include "weakdep/harness.hpp"
