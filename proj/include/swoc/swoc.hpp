#pragma once

#include "swoc/benchmarks.hpp"
#include "swoc/finite_diff.hpp"
#include "swoc/io.hpp"
#include "swoc/lq_approx.hpp"
#include "swoc/outer.hpp"
#include "swoc/problem.hpp"
#include "swoc/rollout.hpp"
#include "swoc/slq.hpp"
#include "swoc/switch_gradient.hpp"
#include "swoc/validate.hpp"
