#pragma once

#include "idstr/alphabet.hpp"
#include "idstr/bcjr.hpp"
#include "idstr/bmala.hpp"
#include "idstr/channel.hpp"
#include "idstr/codes.hpp"
#include "idstr/errors.hpp"
#include "idstr/evaluation.hpp"
#include "idstr/log_math.hpp"
#include "idstr/random.hpp"
#include "idstr/trellis.hpp"
#include "idstr/trellis_bma.hpp"
