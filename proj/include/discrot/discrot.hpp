#ifndef DISCROT_DISCROT_HPP
#define DISCROT_DISCROT_HPP

#include "discrot/consistency.hpp"
#include "discrot/core.hpp"
#include "discrot/dynamics.hpp"
#include "discrot/energy.hpp"
#include "discrot/error.hpp"
#include "discrot/ldp.hpp"
#include "discrot/simplex.hpp"
#include "discrot/stability.hpp"
#include "discrot/stochastic.hpp"

#endif  // DISCROT_DISCROT_HPP
