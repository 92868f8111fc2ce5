#pragma once

#include "sbpnet/config.hpp"
#include "sbpnet/csv.hpp"
#include "sbpnet/distributions.hpp"
#include "sbpnet/errors.hpp"
#include "sbpnet/event_calendar.hpp"
#include "sbpnet/heavy_traffic.hpp"
#include "sbpnet/linalg.hpp"
#include "sbpnet/matrices.hpp"
#include "sbpnet/network.hpp"
#include "sbpnet/optimizer.hpp"
#include "sbpnet/policy.hpp"
#include "sbpnet/simulator.hpp"
#include "sbpnet/stats.hpp"

namespace sbpnet {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sbpnet
