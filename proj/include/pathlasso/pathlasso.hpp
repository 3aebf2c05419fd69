#pragma once

#include "pathlasso/baselines.hpp"
#include "pathlasso/data.hpp"
#include "pathlasso/evaluation.hpp"
#include "pathlasso/factorization.hpp"
#include "pathlasso/network.hpp"
#include "pathlasso/optimizer.hpp"
#include "pathlasso/penalties.hpp"
#include "pathlasso/rng.hpp"
#include "pathlasso/serialize.hpp"
#include "pathlasso/trainer.hpp"
