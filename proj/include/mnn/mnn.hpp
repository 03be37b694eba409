#pragma once

#include "data.hpp"
#include "error.hpp"
#include "fop.hpp"
#include "gradcheck.hpp"
#include "matrix.hpp"
#include "model_io.hpp"
#include "network.hpp"
#include "regions.hpp"
#include "training.hpp"
