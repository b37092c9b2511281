#pragma once

#include "stspec/errors.hpp"
#include "stspec/quadrature.hpp"
#include "stspec/spectra.hpp"
#include "stspec/register.hpp"
#include "stspec/filters.hpp"
#include "stspec/attenuation.hpp"
#include "stspec/montecarlo.hpp"
#include "stspec/fit.hpp"
#include "stspec/grid.hpp"
#include "stspec/reconstruct.hpp"
#include "stspec/config.hpp"
#include "stspec/io.hpp"
#include "stspec/pipeline.hpp"
