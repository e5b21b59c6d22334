#pragma once

#include "bispec/experiments.hpp"
#include "bispec/polyspectra.hpp"
#include "bispec/recovery.hpp"
#include "bispec/rng.hpp"
#include "bispec/signal.hpp"
