#pragma once

// Everything except the JSON layer (json_io.hpp needs nlohmann_json).
#include "bounds.hpp"
#include "chaos.hpp"
#include "errors.hpp"
#include "gamma_target.hpp"
#include "hermite.hpp"
#include "identities.hpp"
#include "monte_carlo.hpp"
#include "simulate.hpp"
#include "stein.hpp"
