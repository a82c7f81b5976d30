#pragma once

#include "lqstack/matrix.hpp"
#include "lqstack/model.hpp"
#include "lqstack/stackelberg.hpp"
#include "lqstack/observer.hpp"
#include "lqstack/simulate.hpp"
#include "lqstack/cost.hpp"
#include "lqstack/io.hpp"
#include "lqstack/config.hpp"
#include "lqstack/reports.hpp"
#include "lqstack/verify.hpp"
