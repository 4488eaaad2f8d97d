#pragma once

#include "caos/aggregate.hpp"
#include "caos/caos.hpp"
#include "caos/core.hpp"
#include "caos/error.hpp"
#include "caos/eval.hpp"
#include "caos/fullconf.hpp"
#include "caos/methods.hpp"
#include "caos/parallel.hpp"
#include "caos/scos.hpp"
#include "caos/simlab.hpp"
#include "caos/tensor_io.hpp"
