// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include "featsearch/common.hpp"
#include "featsearch/feature_space.hpp"
#include "featsearch/presets.hpp"
#include "featsearch/nsga2.hpp"
#include "featsearch/poi.hpp"
#include "featsearch/gateway.hpp"
#include "featsearch/mock.hpp"
#include "featsearch/testgen.hpp"
#include "featsearch/record.hpp"
#include "featsearch/evaluation.hpp"
#include "featsearch/search.hpp"
#include "featsearch/baselines.hpp"
#include "featsearch/analysis.hpp"
#include "featsearch/campaign.hpp"
