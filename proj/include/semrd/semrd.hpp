#pragma once

#include "semrd/error.hpp"
#include "semrd/prob.hpp"
#include "semrd/distortion.hpp"
#include "semrd/solver.hpp"
#include "semrd/estimators.hpp"
#include "semrd/codec.hpp"
#include "semrd/channel.hpp"
#include "semrd/bounds.hpp"
#include "semrd/experiments.hpp"
