// -*- c++ -*-
// Umbrella header.
#ifndef WITS_WITS_HPP
#define WITS_WITS_HPP

#include "wits/errors.hpp"
#include "wits/gaussian_core.hpp"
#include "wits/base_quantizer.hpp"
#include "wits/strategy_model.hpp"
#include "wits/follower_response.hpp"
#include "wits/leader_response.hpp"
#include "wits/best_response.hpp"
#include "wits/cost_eval.hpp"
#include "wits/equilibrium.hpp"
#include "wits/serialization.hpp"

#endif
