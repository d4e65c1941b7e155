#pragma once

#include "choquard/asymptotics.hpp"
#include "choquard/bubbles.hpp"
#include "choquard/constants.hpp"
#include "choquard/error.hpp"
#include "choquard/greens.hpp"
#include "choquard/minimize.hpp"
#include "choquard/parallel.hpp"
#include "choquard/quadrature.hpp"
#include "choquard/radial_grid.hpp"
#include "choquard/riesz.hpp"
#include "choquard/spectral_space.hpp"
