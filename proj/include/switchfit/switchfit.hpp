#ifndef SWITCHFIT_SWITCHFIT_HPP
#define SWITCHFIT_SWITCHFIT_HPP

#include "switchfit/bench.hpp"
#include "switchfit/em.hpp"
#include "switchfit/errors.hpp"
#include "switchfit/filters.hpp"
#include "switchfit/io.hpp"
#include "switchfit/model.hpp"
#include "switchfit/oracle.hpp"
#include "switchfit/random.hpp"
#include "switchfit/simulator.hpp"
#include "switchfit/stats.hpp"

#endif  // SWITCHFIT_SWITCHFIT_HPP
