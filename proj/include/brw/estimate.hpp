#pragma once

#include <cstdint>
#include <string>

namespace brw {

enum class Method { DirectMc, SpineIs, ExactDp };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::DirectMc: return "direct_mc";
        case Method::SpineIs: return "spine_is";
        case Method::ExactDp: return "exact_dp";
    }
    return "?";
}

// Provenance carried by every estimate so result rows are reproducible.
struct EstimateMeta {
    std::int64_t horizon = 0;
    int dimension = 1;
    double obstacle_p = 0.0;
    std::uint64_t env_seed = 0;     // environment master seed
    std::uint64_t replica_seed = 0; // master seed of the replica stream family
    std::string law_id;
};

// Point estimate with its sampling error. For Method::ExactDp the value is
// deterministic: stderr 0 and replicates 1. A NaN-free neg_log carries
// -log(estimate) when the computation ran in log space and the linear value
// would underflow.
struct SurvivalEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t replicates = 0;
    Method method = Method::DirectMc;
    std::uint64_t truncated_count = 0;
    bool has_neg_log = false;
    double neg_log = 0.0;
    EstimateMeta meta;
};

}  // namespace brw
