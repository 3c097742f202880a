#pragma once

#include "dynbin/config.hpp"
#include "dynbin/csv.hpp"
#include "dynbin/datagen.hpp"
#include "dynbin/errors.hpp"
#include "dynbin/experiment.hpp"
#include "dynbin/keyvalue.hpp"
#include "dynbin/model.hpp"
#include "dynbin/posterior.hpp"
#include "dynbin/priors.hpp"
#include "dynbin/rng.hpp"
#include "dynbin/sampler.hpp"
#include "dynbin/samples.hpp"
#include "dynbin/spindex.hpp"
