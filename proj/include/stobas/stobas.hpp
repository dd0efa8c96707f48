#pragma once

#include "stobas/analysis.hpp"
#include "stobas/committor.hpp"
#include "stobas/dense.hpp"
#include "stobas/dynamics.hpp"
#include "stobas/errors.hpp"
#include "stobas/grid.hpp"
#include "stobas/markov.hpp"
#include "stobas/parallel.hpp"
#include "stobas/region.hpp"
#include "stobas/rng.hpp"
#include "stobas/sampling.hpp"
#include "stobas/solve.hpp"
#include "stobas/sparse.hpp"
#include "stobas/ulam.hpp"
#include "stobas/vec.hpp"
#include "stobas/version.hpp"
