#pragma once

#include "stlplan/dynamics.hpp"
#include "stlplan/error.hpp"
#include "stlplan/geometry.hpp"
#include "stlplan/headings.hpp"
#include "stlplan/mission.hpp"
#include "stlplan/optimizer.hpp"
#include "stlplan/pipeline.hpp"
#include "stlplan/replanner.hpp"
#include "stlplan/robustness.hpp"
#include "stlplan/scenario.hpp"
#include "stlplan/stl_ast.hpp"
#include "stlplan/trace.hpp"
#include "stlplan/warmstart.hpp"
