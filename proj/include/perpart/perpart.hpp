#pragma once

#include "perpart/arcs.hpp"
#include "perpart/constructions.hpp"
#include "perpart/diagnostics.hpp"
#include "perpart/energy.hpp"
#include "perpart/error.hpp"
#include "perpart/functionals.hpp"
#include "perpart/geometry.hpp"
#include "perpart/grid_partition.hpp"
#include "perpart/io.hpp"
#include "perpart/lattice.hpp"
#include "perpart/model.hpp"
#include "perpart/optimizer.hpp"
#include "perpart/poly_partition.hpp"
