// Umbrella header.
#pragma once

#include "dsd/grouping.hpp"
#include "dsd/image.hpp"
#include "dsd/io.hpp"
#include "dsd/manifest.hpp"
#include "dsd/metrics.hpp"
#include "dsd/noise.hpp"
#include "dsd/patch.hpp"
#include "dsd/pipeline.hpp"
#include "dsd/sparse.hpp"
#include "dsd/subdict.hpp"
#include "dsd/version.hpp"
