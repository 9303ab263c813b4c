#pragma once

#include "slm/lm/bilstm.hpp"
#include "slm/lm/checkpoint.hpp"
#include "slm/lm/config.hpp"
#include "slm/lm/layers.hpp"
#include "slm/lm/model.hpp"
#include "slm/lm/params.hpp"
#include "slm/lm/training.hpp"
#include "slm/lm/universal_transformer.hpp"
