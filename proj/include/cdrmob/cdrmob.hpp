#pragma once

#include "cdrmob/civil_time.hpp"
#include "cdrmob/core.hpp"
#include "cdrmob/density.hpp"
#include "cdrmob/geo.hpp"
#include "cdrmob/home.hpp"
#include "cdrmob/ingest.hpp"
#include "cdrmob/manifest.hpp"
#include "cdrmob/metrics.hpp"
#include "cdrmob/parallel.hpp"
#include "cdrmob/patterns.hpp"
#include "cdrmob/pipeline.hpp"
#include "cdrmob/synthgen.hpp"
#include "cdrmob/text.hpp"
#include "cdrmob/validate.hpp"
