#include "entroflow/parallel.hpp"

#include <vector>

#ifdef ENTROFLOW_HAVE_OPENMP
#include <omp.h>
#endif

namespace entroflow {

namespace {
int g_thread_limit = 0;
}

void set_thread_limit(int threads) {
    g_thread_limit = threads < 0 ? 0 : threads;
#ifdef ENTROFLOW_HAVE_OPENMP
    if (g_thread_limit > 0) omp_set_num_threads(g_thread_limit);
#endif
}

int thread_limit() { return g_thread_limit; }

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 32) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MeanEstimate estimate_mean(std::span<const double> samples) {
    MeanEstimate est;
    est.count = samples.size();
    if (samples.empty()) return est;
    const double n = static_cast<double>(samples.size());
    est.mean = pairwise_sum(samples) / n;
    if (samples.size() < 2) return est;
    std::vector<double> sq(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double d = samples[i] - est.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / (n - 1.0);
    est.std_error = std::sqrt(var / n);
    return est;
}

}  // namespace entroflow
