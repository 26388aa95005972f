#pragma once

#include "svq/chain.hpp"

namespace svq::detail {

/// Objective and optionally gradients of the weighted total, reduced in fixed chunk order.
ChainGradients evaluate_chain(const ChainNetwork& chain, std::span<const Vector> batch,
                              bool with_grads, bool full_backprop, std::size_t threads);

}  // namespace svq::detail
