#pragma once

#include "twae/assignment.hpp"
#include "twae/autoencoder.hpp"
#include "twae/batch_design.hpp"
#include "twae/common.hpp"
#include "twae/config.hpp"
#include "twae/data.hpp"
#include "twae/discrepancy.hpp"
#include "twae/experiments.hpp"
#include "twae/tessellation.hpp"
#include "twae/trainer.hpp"
