#pragma once

#include "errors.hpp"
#include "normal.hpp"
#include "stats.hpp"
#include "model.hpp"
#include "ars.hpp"
#include "sampler.hpp"
#include "inference.hpp"
#include "selection.hpp"
#include "data.hpp"
#include "outputs.hpp"
