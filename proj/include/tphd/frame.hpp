#pragma once

#include "tphd/models.hpp"

#include <vector>

namespace tphd {

/// Detections of one scan. `provenance` (index of the originating truth
/// target, -1 for clutter) is for evaluation only; the filter never reads it.
struct MeasurementFrame {
    int time = 0;
    std::vector<Measurement> measurements;
    std::vector<int> provenance;
};

}  // namespace tphd
