#pragma once

#include "sigver/common.hpp"
#include "sigver/config.hpp"
#include "sigver/dtw.hpp"
#include "sigver/evaluation.hpp"
#include "sigver/features.hpp"
#include "sigver/lstm.hpp"
#include "sigver/parallel.hpp"
#include "sigver/siamese.hpp"
#include "sigver/signature_data.hpp"
#include "sigver/synth.hpp"
#include "sigver/train.hpp"
