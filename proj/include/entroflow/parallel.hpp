#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace entroflow {

/// Upper bound on worker threads for particle loops (0 = runtime default).
void set_thread_limit(int threads);
int thread_limit();

/// Mean and standard error with a fixed (index-ordered) pairwise summation,
/// so results do not depend on how the samples were produced.
struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};
MeanEstimate estimate_mean(std::span<const double> samples);

/// Pairwise sum in index order.
double pairwise_sum(std::span<const double> values);

}  // namespace entroflow
