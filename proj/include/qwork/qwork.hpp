#pragma once

#include "qwork/config.hpp"
#include "qwork/dynamics.hpp"
#include "qwork/errors.hpp"
#include "qwork/meter.hpp"
#include "qwork/qcore.hpp"
#include "qwork/quadrature.hpp"
#include "qwork/rng.hpp"
#include "qwork/sweep.hpp"
#include "qwork/theorems.hpp"
