#pragma once

#include "pore/base_rec.hpp"
#include "pore/beta.hpp"
#include "pore/bounds.hpp"
#include "pore/certify.hpp"
#include "pore/combinatorics.hpp"
#include "pore/common.hpp"
#include "pore/config.hpp"
#include "pore/ensemble.hpp"
#include "pore/io.hpp"
#include "pore/metrics.hpp"
#include "pore/oracle.hpp"
#include "pore/parallel.hpp"
#include "pore/ratings.hpp"
#include "pore/rng.hpp"
