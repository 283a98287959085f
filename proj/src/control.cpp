#include "entroflow/control.hpp"

#include <cmath>

#include "entroflow/entropy.hpp"
#include "entroflow/error.hpp"
#include "entroflow/parallel.hpp"

namespace entroflow {

namespace {

void require_accumulators(const PathEnsemble& ens) {
    if (ens.energy.size() != ens.particles || ens.gap_integral.size() != ens.particles) {
        throw ConfigError("ensemble carries no control accumulators");
    }
}

struct Totals {
    MeanEstimate terminal;
    MeanEstimate energy;
    MeanEstimate total;
};

Totals estimate_totals(const PathEnsemble& ens, const ScoreField& field, double read_time) {
    const auto x = ens.final_states();
    const ScoreField::TimeBracket tb = field.bracket(read_time);
    std::vector<double> terminal(ens.particles), total(ens.particles);
    for (std::size_t i = 0; i < ens.particles; ++i) {
        terminal[i] = field.log_ratio_at(tb, x[i]);
        total[i] = terminal[i] + ens.energy[i];
    }
    return {estimate_mean(terminal), estimate_mean(ens.energy), estimate_mean(total)};
}

CostReport finish(const PathEnsemble& ens, const Totals& t, double reference) {
    CostReport r;
    r.policy = ens.policy_label;
    r.terminal_term = t.terminal.mean;
    r.energy_term = t.energy.mean;
    r.total = t.total.mean;
    r.std_error = t.total.std_error;
    r.reference_entropy = reference;
    r.gap = r.total - reference;
    r.clip_rate = ens.clip_rate();
    r.clip_flagged = r.clip_rate >= kMaxClipRate;
    r.particles = ens.particles;
    return r;
}

}  // namespace

CostReport expected_cost_reversed(const PathEnsemble& ensemble, const ScoreField& score, const DensityField& field,
                                  const GibbsMeasure& gibbs, double t_min) {
    require_accumulators(ensemble);
    if (t_min < 0.0) throw ConfigError("t_min must be nonnegative");
    const double origin = field.start_time();
    const double reference = relative_entropy(field.at(origin + ensemble.horizon), gibbs, score.floor());
    CostReport r = finish(ensemble, estimate_totals(ensemble, score, origin + t_min), reference);
    for (std::size_t j = 0; j < r.terminal_sensitivity.size(); ++j) {
        const double scale = static_cast<double>(1u << j);
        r.terminal_sensitivity[j] = estimate_totals(ensemble, score, origin + scale * t_min).total.mean;
    }
    return r;
}

CostReport expected_cost_second(const PathEnsemble& ensemble, const LambdaField& lambda, const DensityField& field,
                                const GibbsMeasure& gibbs) {
    require_accumulators(ensemble);
    const double reference =
        relative_entropy(field.at(lambda.offset + ensemble.horizon), gibbs, lambda.field.floor());
    CostReport r = finish(ensemble, estimate_totals(ensemble, lambda.field, 0.0), reference);
    r.terminal_sensitivity.fill(r.total);
    return r;
}

double GapReport::combined_se() const { return std::sqrt(measured_se * measured_se + predicted_se * predicted_se); }

GapReport suboptimality_gap(const PathEnsemble& ensemble, const CostReport& cost, const ControlPolicy& policy) {
    require_accumulators(ensemble);
    if (!(policy.bound <= 10.0)) throw ConfigError("suboptimality gap needs a perturbation bounded by 10");
    const MeanEstimate predicted = estimate_mean(ensemble.gap_integral);
    GapReport g;
    g.measured = cost.gap;
    g.measured_se = cost.std_error;
    g.predicted = predicted.mean;
    g.predicted_se = predicted.std_error;
    return g;
}

EntropicDecomposition entropic_decomposition(const PathEnsemble& ensemble, const CostReport& cost,
                                             const GibbsMeasure& gibbs, const Grid& bins) {
    if (!gibbs.finite()) throw ConfigError("entropic decomposition needs a finite Gibbs measure");
    const auto lw = ensemble.final_log_weights();
    std::vector<double> neg(lw.size());
    for (std::size_t i = 0; i < lw.size(); ++i) neg[i] = -lw[i];

    const double t_end = ensemble.times.back();
    const Histogram simulated = empirical_marginal(ensemble, t_end, bins, false);
    const Histogram reweighted = empirical_marginal(ensemble, t_end, bins, true);
    double kl = 0.0;
    for (std::size_t j = 0; j < simulated.mass.size(); ++j) {
        const double a = simulated.mass[j];
        if (a > 0.0) kl += a * std::log(a / reweighted.mass[j]);
    }

    EntropicDecomposition d;
    d.total = cost.total;
    d.path_entropy = estimate_mean(neg).mean;
    d.endpoint_entropy = kl;
    d.d_term = d.path_entropy - d.endpoint_entropy;
    d.h_term = d.total - d.d_term;
    return d;
}

}  // namespace entroflow
