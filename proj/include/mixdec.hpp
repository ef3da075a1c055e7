#pragma once

#include "mixdec/types.hpp"
#include "mixdec/expr.hpp"
#include "mixdec/core.hpp"
#include "mixdec/config.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/covering.hpp"
#include "mixdec/periodic.hpp"
#include "mixdec/surgery.hpp"
#include "mixdec/models.hpp"
#include "mixdec/report.hpp"
#include "mixdec/svg.hpp"
#include "mixdec/run.hpp"
