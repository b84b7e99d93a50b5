#pragma once

#include "uacnn/error.hpp"
#include "uacnn/json_io.hpp"
#include "uacnn/linear_layers.hpp"
#include "uacnn/loss.hpp"
#include "uacnn/mc_oracle.hpp"
#include "uacnn/moment_tensor.hpp"
#include "uacnn/network.hpp"
#include "uacnn/nonlinear_layers.hpp"
#include "uacnn/rng.hpp"
