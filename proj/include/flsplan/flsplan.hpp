#pragma once

#include "flsplan/conflict.hpp"
#include "flsplan/deploy.hpp"
#include "flsplan/greedy.hpp"
#include "flsplan/grid.hpp"
#include "flsplan/io.hpp"
#include "flsplan/model.hpp"
#include "flsplan/motion.hpp"
#include "flsplan/oracle.hpp"
#include "flsplan/parallel.hpp"
