#pragma once

#include "ralign/core.hpp"
#include "ralign/geom.hpp"
#include "ralign/cost.hpp"
#include "ralign/witness.hpp"
#include "ralign/prob.hpp"
#include "ralign/kdtree.hpp"
#include "ralign/registration.hpp"
#include "ralign/data.hpp"
#include "ralign/report.hpp"
