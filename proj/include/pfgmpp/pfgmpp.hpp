#pragma once

#include "pfgmpp/analysis.hpp"
#include "pfgmpp/csv.hpp"
#include "pfgmpp/datasets.hpp"
#include "pfgmpp/denoiser.hpp"
#include "pfgmpp/field.hpp"
#include "pfgmpp/geometry.hpp"
#include "pfgmpp/network.hpp"
#include "pfgmpp/objective.hpp"
#include "pfgmpp/rng.hpp"
#include "pfgmpp/sampler.hpp"
#include "pfgmpp/trainer.hpp"
#include "pfgmpp/types.hpp"
