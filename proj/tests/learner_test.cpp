#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "noisyor/learner.hpp"
#include "noisyor/rng.hpp"
#include "support.hpp"

using namespace noisyor;
using namespace testsupport;

TEST_CASE("remove_influence equals deleting the disease") {
    const NetworkStructure s = demo_structure();
    const NoisyOrParameters params = demo_parameters();
    ExactMomentSource source(s, params);

    const std::vector<int> bc = {1, 2};
    NegativeMoments nm = source.negmoments(bc);
    CHECK(nm.value[3] == doctest::Approx(0.54036).epsilon(1e-12));

    EstimationReport report = EstimationReport::empty(s);
    report.record(ParamId::prior(1), 0.4, 0, 0, 0, s);
    report.record(ParamId::failure(1, 1), 0.3, 0, 0, 0, s);
    report.record(ParamId::failure(1, 2), 0.7, 0, 0, 0, s);

    const NegativeMoments adjusted = remove_influence(s, nm, 1, report);
    CHECK(adjusted.value[3] == doctest::Approx(0.79).epsilon(1e-12));
    // Influence of disease 0 alone on {1,2}: 1 - 0.3 + 0.3*0.5*0.6.
    CHECK(adjusted.value[1] == doctest::Approx(0.85).epsilon(1e-12));

    // A disease with no edge into the set is the identity.
    const std::vector<int> de = {3, 4};
    NegativeMoments nm2 = source.negmoments(de);
    EstimationReport r2 = EstimationReport::empty(s);
    r2.record(ParamId::prior(0), 0.3, 0, 0, 0, s);
    const NegativeMoments same = remove_influence(s, nm2, 0, r2);
    for (std::size_t mask = 0; mask < 4; ++mask)
        CHECK(same.value[mask] == doctest::Approx(nm2.value[mask]).epsilon(1e-14));

    // Removal order cannot matter.
    EstimationReport r3 = EstimationReport::empty(s);
    r3.record(ParamId::prior(0), 0.3, 0, 0, 0, s);
    r3.record(ParamId::failure(0, 1), 0.5, 0, 0, 0, s);
    r3.record(ParamId::failure(0, 2), 0.6, 0, 0, 0, s);
    r3.record(ParamId::prior(1), 0.4, 0, 0, 0, s);
    r3.record(ParamId::failure(1, 1), 0.3, 0, 0, 0, s);
    r3.record(ParamId::failure(1, 2), 0.7, 0, 0, 0, s);
    const NegativeMoments ab = remove_influence(s, remove_influence(s, nm, 0, r3), 1, r3);
    const NegativeMoments ba = remove_influence(s, remove_influence(s, nm, 1, r3), 0, r3);
    for (std::size_t mask = 0; mask < 4; ++mask)
        CHECK(ab.value[mask] == doctest::Approx(ba.value[mask]).epsilon(1e-13));

    // Missing parameters are a precondition violation.
    EstimationReport blank = EstimationReport::empty(s);
    CHECK_THROWS_AS((void)remove_influence(s, nm, 1, blank), NoisyOrError);
}

TEST_CASE("triplet learning on exact moments") {
    const NetworkStructure s = demo_structure();
    const NoisyOrParameters params = demo_parameters();
    ExactMomentSource source(s, params);
    const Schedule schedule = find_schedule(s, false);

    EstimationReport report = EstimationReport::empty(s);
    learn_triplet(s, source, schedule.rounds[0][0], report);
    CHECK(report.params.priors[1] == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(report.params.failures[s.edge_index(1, 1)] == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(report.params.failures[s.edge_index(1, 3)] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(report.params.failures[s.edge_index(1, 4)] == doctest::Approx(0.5).epsilon(1e-9));

    learn_triplet(s, source, schedule.rounds[0][1], report);
    CHECK(report.params.failures[s.edge_index(1, 2)] == doctest::Approx(0.7).epsilon(1e-9));

    // Round-1 step with the adjustment exercises the division path.
    learn_triplet(s, source, schedule.rounds[1][0], report);
    CHECK(report.params.priors[0] == doctest::Approx(0.3).epsilon(1e-8));
    CHECK(report.params.failures[s.edge_index(0, 0)] == doctest::Approx(0.2).epsilon(1e-8));
    CHECK(report.params.failures[s.edge_index(0, 1)] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(report.params.failures[s.edge_index(0, 2)] == doctest::Approx(0.6).epsilon(1e-8));

    // A step whose adjustment is missing fails its precondition.
    EstimationReport blank = EstimationReport::empty(s);
    CHECK_THROWS_AS(learn_triplet(s, source, schedule.rounds[1][0], blank), NoisyOrError);
}

TEST_CASE("adjustment equals learning on the parent-deleted network") {
    // Learn disease 0's triplet after adjusting disease 1 away, and compare
    // against the same triplet on a network in which disease 1 never existed.
    const NetworkStructure s = demo_structure();
    const NoisyOrParameters params = demo_parameters();
    ExactMomentSource source(s, params);
    const Schedule schedule = find_schedule(s, false);
    EstimationReport report = execute_schedule(s, schedule, source);

    const NetworkStructure solo = NetworkStructure::from_edges(1, 5, {{0, 0}, {0, 1}, {0, 2}});
    NoisyOrParameters sp;
    sp.priors = {params.priors[0]};
    sp.failures = {params.failures[0], params.failures[1], params.failures[2]};
    sp.leaks = params.leaks;
    ExactMomentSource solo_source(solo, sp);
    const Schedule solo_schedule = find_schedule(solo, false);
    EstimationReport solo_report = execute_schedule(solo, solo_schedule, solo_source);

    CHECK(report.params.priors[0] ==
          doctest::Approx(solo_report.params.priors[0]).epsilon(1e-9));
    for (int j : {0, 1, 2})
        CHECK(report.params.failures[s.edge_index(0, j)] ==
              doctest::Approx(solo_report.params.failures[solo.edge_index(0, j)])
                  .epsilon(1e-9));
}

TEST_CASE("pair learning on exact moments") {
    const NetworkStructure s = demo_structure();
    const NoisyOrParameters params = demo_parameters();
    ExactMomentSource source(s, params);

    EstimationReport report = EstimationReport::empty(s);
    report.record(ParamId::prior(1), 0.4, 0, 0, 0, s);
    report.record(ParamId::failure(1, 3), 0.25, 0, 0, 0, s);

    ScheduleStep step;
    step.kind = StepKind::Pair;
    step.disease = 1;
    step.symptoms = {3, 4};
    step.anchor_symptom = 3;
    step.round = 1;
    step.targets = {ParamId::failure(1, 4)};
    learn_pair(s, source, step, report);
    CHECK(report.params.failures[s.edge_index(1, 4)] == doctest::Approx(0.5).epsilon(1e-10));

    // Independent symptoms force failure 1 (pre-clipping).
    const NetworkStructure indep = NetworkStructure::from_edges(1, 3, {{0, 0}, {0, 1}, {0, 2}});
    NoisyOrParameters ip;
    ip.priors = {0.4};
    ip.failures = {0.3, 1.0 - 1e-9, 0.6};  // symptom 1 effectively detached
    ip.leaks = {0.0, 0.0, 0.0};
    ExactMomentSource isource(indep, ip);
    EstimationReport ireport = EstimationReport::empty(indep);
    ireport.record(ParamId::prior(0), 0.4, 0, 0, 0, indep);
    ireport.record(ParamId::failure(0, 0), 0.3, 0, 0, 0, indep);
    ScheduleStep istep;
    istep.kind = StepKind::Pair;
    istep.disease = 0;
    istep.symptoms = {0, 1};
    istep.anchor_symptom = 0;
    istep.targets = {ParamId::failure(0, 1)};
    learn_pair(indep, isource, istep, ireport);
    CHECK(ireport.params.failures[indep.edge_index(0, 1)] ==
          doctest::Approx(1.0 - 1e-6).epsilon(1e-7));

    // Vanishing prior makes the equation degenerate.
    EstimationReport zero = EstimationReport::empty(s);
    zero.record(ParamId::prior(1), 0.0, 0, 0, 0, s);
    zero.record(ParamId::failure(1, 3), 0.25, 0, 0, 0, s);
    CHECK_THROWS_AS(learn_pair(s, source, step, zero), NoisyOrError);
}

TEST_CASE("noise learning") {
    const NetworkStructure s = demo_structure();
    NoisyOrParameters params = demo_parameters();
    params.leaks[1] = 0.1;
    ExactMomentSource source(s, params);

    EstimationReport report = EstimationReport::empty(s);
    report.record(ParamId::prior(0), 0.3, 0, 0, 0, s);
    report.record(ParamId::failure(0, 1), 0.5, 0, 0, 0, s);
    report.record(ParamId::prior(1), 0.4, 0, 0, 0, s);
    report.record(ParamId::failure(1, 1), 0.3, 0, 0, 0, s);
    learn_noise(s, source, 1, report);
    CHECK(report.params.leaks[1] == doctest::Approx(0.1).epsilon(1e-10));

    // Unlearned parent: precondition violation.
    EstimationReport blank = EstimationReport::empty(s);
    CHECK_THROWS_AS(learn_noise(s, source, 1, blank), NoisyOrError);

    // Parentless symptom: the leak is the observed activation rate.
    const NetworkStructure lonely = NetworkStructure::from_edges(1, 2, {{0, 0}});
    NoisyOrParameters lp;
    lp.priors = {0.5};
    lp.failures = {0.5};
    lp.leaks = {0.0, 0.2};
    ExactMomentSource lsource(lonely, lp);
    EstimationReport lr = EstimationReport::empty(lonely);
    learn_noise(lonely, lsource, 1, lr);
    CHECK(lr.params.leaks[1] == doctest::Approx(0.2).epsilon(1e-12));

    // Zero-leak network: recovered leak clips to zero.
    const NoisyOrParameters zero_leak = demo_parameters();
    ExactMomentSource zsource(s, zero_leak);
    EstimationReport zr = EstimationReport::empty(s);
    zr.record(ParamId::prior(0), 0.3, 0, 0, 0, s);
    zr.record(ParamId::failure(0, 0), 0.2, 0, 0, 0, s);
    learn_noise(s, zsource, 0, zr);
    CHECK(zr.params.leaks[0] >= 0.0);
    CHECK(zr.params.leaks[0] <= 1e-6);
}

TEST_CASE("end-to-end exact recovery on the demo network") {
    const NetworkStructure s = demo_structure();
    NoisyOrParameters params = demo_parameters();
    params.leaks.assign(5, 0.01);
    ExactMomentSource source(s, params);
    const Schedule schedule = find_schedule(s, false);
    const EstimationReport report = execute_schedule(s, schedule, source);
    CHECK(report.failed_steps.empty());
    CHECK(report.unlearned.empty());
    CHECK(max_param_error(report.params, params) < 1e-8);
    CHECK(report.depth_of(ParamId::prior(1)) == 0);
    CHECK(report.depth_of(ParamId::prior(0)) == 1);
}

TEST_CASE("exact recovery on random learnable structures") {
    int complete = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const NetworkStructure s = random_structure(5, 10, {1, 3}, seed);
        const Schedule schedule = find_schedule(s, true);
        if (!schedule.unlearnable.empty())
            continue;
        ++complete;
        const NoisyOrParameters params = random_params_in(s, 0.1, 0.9, 0.02, seed + 31);
        ExactMomentSource source(s, params);
        const EstimationReport report = execute_schedule(s, schedule, source);
        CHECK(report.failed_steps.empty());
        CHECK(max_param_error(report.params, params) < 1e-7);
    }
    CHECK(complete >= 5);  // the family must actually exercise the pipeline
}

TEST_CASE("sampled recovery within 0.05 on most seeds") {
    const NetworkStructure s = demo_structure();
    NoisyOrParameters params = demo_parameters();
    params.leaks.assign(5, 0.01);
    const Schedule schedule = find_schedule(s, false);
    const StatRequest request = schedule_request(schedule);
    int good = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SampleBatch batch = draw_samples(s, params, 1000000, 4000 + seed);
        const StatStore store = StatStore::collect(batch, request);
        StoreMomentSource source(store);
        const EstimationReport report = execute_schedule(s, schedule, source);
        good += max_param_error(report.params, params) < 0.05;
        // Clipping: nothing reported may leave the legal parameter ranges.
        for (double p : report.params.priors)
            CHECK((p >= 1e-6 && p <= 1.0 - 1e-6));
        for (double f : report.params.failures)
            CHECK((f >= 1e-6 && f <= 1.0 - 1e-6));
        for (double leak : report.params.leaks)
            CHECK((leak >= 0.0 && leak <= 1.0 - 1e-6));
    }
    CHECK(good >= 18);
}

TEST_CASE("failed steps are recorded and execution continues") {
    const NetworkStructure s = demo_structure();
    const NoisyOrParameters params = demo_parameters();
    // A tensor that cannot decompose: all priors zero means rank 1.
    NoisyOrParameters degenerate = params;
    degenerate.priors = {0.0, 0.0};
    ExactMomentSource source(s, degenerate);
    const Schedule schedule = find_schedule(s, false);
    const EstimationReport report = execute_schedule(s, schedule, source);
    CHECK(!report.failed_steps.empty());
    CHECK(!report.unlearned.empty());
    // Clipping still holds for whatever was learned.
    for (std::size_t i = 0; i < report.params.priors.size(); ++i)
        if (report.prior_learned[i])
            CHECK((report.params.priors[i] >= 1e-6 && report.params.priors[i] <= 1.0 - 1e-6));
}

TEST_CASE("l1 error and the uniform baseline") {
    const NetworkStructure s = demo_structure();
    NoisyOrParameters truth = demo_parameters();
    truth.leaks.assign(5, 0.01);
    CHECK(l1_error(s, truth, truth) == doctest::Approx(0.0));

    NoisyOrParameters off = truth;
    off.priors[0] += 0.1;
    CHECK(l1_error(s, off, truth) == doctest::Approx(0.1).epsilon(1e-12));

    const NoisyOrParameters base = uniform_baseline(s);
    double expected = 0.0;
    for (double p : truth.priors)
        expected += std::abs(0.5 - p);
    for (double f : truth.failures)
        expected += std::abs(0.5 - f);
    for (double leak : truth.leaks)
        expected += leak;
    CHECK(l1_error(s, base, truth) == doctest::Approx(expected).epsilon(1e-12));

    NoisyOrParameters wrong = truth;
    wrong.priors.pop_back();
    CHECK_THROWS_AS((void)l1_error(s, wrong, truth), NoisyOrError);
}

TEST_CASE("error decays with sample size") {
    const NetworkStructure s = demo_structure();
    const Schedule schedule = find_schedule(s, false);
    const StatRequest request = schedule_request(schedule);
    GeneratorConfig config;
    std::vector<double> medians;
    const std::vector<std::uint64_t> grid = {100, 1000, 10000, 100000, 1000000};
    std::vector<std::vector<double>> errors(grid.size());
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
        config.seed = 900 + rep;
        const NoisyOrParameters truth = random_parameters(s, config);
        const SampleBatch batch = draw_samples(s, truth, 1000000, 7000 + rep);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const StatStore store = StatStore::collect(batch, request, 0, grid[g]);
            StoreMomentSource source(store);
            const EstimationReport report = execute_schedule(s, schedule, source);
            errors[g].push_back(l1_error(s, report.params, truth));
        }
    }
    for (auto& errs : errors) {
        std::sort(errs.begin(), errs.end());
        medians.push_back(0.5 * (errs[4] + errs[5]));
    }
    for (std::size_t g = 1; g < medians.size(); ++g)
        CHECK(medians[g] < medians[g - 1]);
    const double ratio = medians[2] / medians[4];
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 30.0);
}
