#pragma once

#include <adaptexp/analysis.hpp>
#include <adaptexp/harness.hpp>
#include <adaptexp/losses.hpp>
#include <adaptexp/mechanisms.hpp>
#include <adaptexp/posterior.hpp>
#include <adaptexp/store.hpp>
#include <adaptexp/types.hpp>
#include <adaptexp/validate.hpp>
