#pragma once

#include "analysis.hpp"
#include "config.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "model.hpp"
#include "spectrum.hpp"
#include "trajectory.hpp"
