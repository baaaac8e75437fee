#pragma once

// Umbrella header.

#include "deepcare/baselines.hpp"
#include "deepcare/cells.hpp"
#include "deepcare/data.hpp"
#include "deepcare/embedding.hpp"
#include "deepcare/eval.hpp"
#include "deepcare/generator.hpp"
#include "deepcare/gradients.hpp"
#include "deepcare/linalg.hpp"
#include "deepcare/network.hpp"
#include "deepcare/training.hpp"
#include "deepcare/verify.hpp"
