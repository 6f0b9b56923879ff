// SPDX-License-Identifier: MIT
#pragma once

#include "tenfactor/als.hpp"
#include "tenfactor/errors.hpp"
#include "tenfactor/factor_test.hpp"
#include "tenfactor/io.hpp"
#include "tenfactor/model.hpp"
#include "tenfactor/parallel.hpp"
#include "tenfactor/rng.hpp"
#include "tenfactor/simulate.hpp"
#include "tenfactor/spectrum.hpp"
#include "tenfactor/tensor.hpp"
#include "tenfactor/tpca.hpp"
#include "tenfactor/version.hpp"
