#pragma once

#include <cstdint>

namespace qnetsim {

using NodeId = std::int32_t;
using LinkId = std::int32_t;
using RequestId = std::int64_t;
using EpId = std::int64_t;

inline constexpr NodeId kEngineInternal = -1;
inline constexpr NodeId kNoNode = -1;
inline constexpr LinkId kNoLink = -1;

// Request tag of predistributed EPs; they match any active request.
inline constexpr RequestId kPredistributed = -1;
inline constexpr RequestId kNoRequest = -2;

}  // namespace qnetsim
