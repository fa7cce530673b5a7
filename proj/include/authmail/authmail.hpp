#pragma once

// Convenience umbrella for the whole library.

#include "authmail/char_cnn.hpp"
#include "authmail/corpus.hpp"
#include "authmail/dataset.hpp"
#include "authmail/encoding.hpp"
#include "authmail/error.hpp"
#include "authmail/layers.hpp"
#include "authmail/metrics.hpp"
#include "authmail/naive_bayes.hpp"
#include "authmail/profile.hpp"
#include "authmail/rng.hpp"
#include "authmail/tensor.hpp"
#include "authmail/train.hpp"
