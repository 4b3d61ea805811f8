#pragma once

#include "momsos/analysis.hpp"
#include "momsos/cli.hpp"
#include "momsos/error.hpp"
#include "momsos/gmp.hpp"
#include "momsos/parse.hpp"
#include "momsos/poly.hpp"
#include "momsos/relax.hpp"
#include "momsos/sdp.hpp"
#include "momsos/sdpa.hpp"
#include "momsos/semialg.hpp"
#include "momsos/trace_io.hpp"
