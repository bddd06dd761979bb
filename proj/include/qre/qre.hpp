#pragma once

#include "qre/bounds.hpp"
#include "qre/catalog.hpp"
#include "qre/ergodicity.hpp"
#include "qre/model.hpp"
#include "qre/model_io.hpp"
#include "qre/numerics.hpp"
#include "qre/separability.hpp"
#include "qre/simulate.hpp"
