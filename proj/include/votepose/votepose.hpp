#pragma once

// Convenience umbrella for the whole library.

#include "votepose/errors.hpp"
#include "votepose/geometry.hpp"
#include "votepose/kdtree.hpp"
#include "votepose/keypoints.hpp"
#include "votepose/mean_shift.hpp"
#include "votepose/metrics.hpp"
#include "votepose/model_io.hpp"
#include "votepose/number_io.hpp"
#include "votepose/pose_fit.hpp"
#include "votepose/random.hpp"
#include "votepose/registry.hpp"
#include "votepose/simulation.hpp"
#include "votepose/voting.hpp"
