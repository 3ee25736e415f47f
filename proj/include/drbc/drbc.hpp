#pragma once

#include "drbc/errors.hpp"
#include "drbc/evalkit.hpp"
#include "drbc/exact_bc.hpp"
#include "drbc/graph.hpp"
#include "drbc/model.hpp"
#include "drbc/numerics.hpp"
#include "drbc/rng.hpp"
#include "drbc/training.hpp"
