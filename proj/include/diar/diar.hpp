#pragma once

#include "diar/audio.hpp"
#include "diar/clustering.hpp"
#include "diar/domain.hpp"
#include "diar/embeddings.hpp"
#include "diar/features.hpp"
#include "diar/io.hpp"
#include "diar/log.hpp"
#include "diar/pipeline.hpp"
#include "diar/resegmentation.hpp"
#include "diar/scoring.hpp"
#include "diar/segmentation.hpp"
#include "diar/timeline.hpp"
