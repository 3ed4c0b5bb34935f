// Command-line surface for the noisy-or learning library: generation,
// sampling, statistics collection, scheduling, learning, evaluation, the EM
// baseline, identifiability tables and the clean-up grid search.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "noisyor/em.hpp"
#include "noisyor/experiment.hpp"
#include "noisyor/identifiability.hpp"
#include "noisyor/io.hpp"
#include "noisyor/learner.hpp"
#include "noisyor/moments.hpp"
#include "noisyor/rng.hpp"
#include "noisyor/sampler.hpp"
#include "noisyor/scheduler.hpp"

namespace {

using namespace noisyor;

NoisyOrParameters require_params(const NetworkFile& file, const std::string& path) {
    require(file.params.has_value(), ErrorCode::InvalidArgument,
            path + " carries no parameters");
    return *file.params;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    require(out.good(), ErrorCode::IoError, "cannot open " + path + " for writing");
    return out;
}

int cmd_generate(const std::string& out_path, int n, int m, int degree_lo, int degree_hi,
                 std::uint64_t seed, double lo, double hi, double leak, bool zipf,
                 double zipf_s, double zipf_top, bool structure_only) {
    NetworkStructure s = random_structure(n, m, {degree_lo, degree_hi}, seed);
    if (structure_only) {
        write_network(out_path, s, nullptr);
        return 0;
    }
    GeneratorConfig config;
    config.seed = Rng::derive(seed, 1);
    config.lo = lo;
    config.hi = hi;
    config.leak = leak;
    config.zipf_exponent = zipf_s;
    config.zipf_top = zipf_top;
    NoisyOrParameters params = random_parameters(s, config);
    if (zipf)
        params.priors = zipf_priors(n, zipf_s, zipf_top);
    write_network(out_path, s, &params);
    return 0;
}

int cmd_sample(const std::string& network_path, const std::string& out_path, std::uint64_t n,
               std::uint64_t seed, int shards) {
    NetworkFile file = read_network(network_path);
    const NoisyOrParameters params = require_params(file, network_path);
    write_samples(out_path, draw_samples(file.structure, params, n, seed, shards));
    return 0;
}

int cmd_schedule(const std::string& network_path, const std::string& out_path, bool use_pairs) {
    NetworkFile file = read_network(network_path);
    const Schedule schedule = find_schedule(file.structure, use_pairs);
    write_schedule(out_path, schedule);
    const Certificate cert = certificate(schedule);
    if (cert.identifiable) {
        std::cout << "IDENTIFIABLE: schedule learns all "
                  << schedule.learned.size() << " parameters, max depth "
                  << schedule.max_depth() << "\n";
    } else {
        std::cout << "RESIDUAL: " << cert.residual_parameters.size()
                  << " parameters unlearnable, parents:";
        for (int i : cert.residual_parents)
            std::cout << ' ' << i;
        std::cout << "\n";
    }
    return 0;
}

int cmd_collect(const std::string& samples_path, const std::string& schedule_path,
                const std::string& network_path, const std::string& out_path) {
    NetworkFile file = read_network(network_path);
    const Schedule schedule = read_schedule(schedule_path, file.structure);
    const SampleBatch batch = read_samples(samples_path);
    write_store(out_path, StatStore::collect(batch, schedule_request(schedule)));
    return 0;
}

int cmd_learn(const std::string& store_path, const std::string& schedule_path,
              const std::string& network_path, const std::string& out_path) {
    NetworkFile file = read_network(network_path);
    const Schedule schedule = read_schedule(schedule_path, file.structure);
    const StatStore store = read_store(store_path);
    StoreMomentSource source(store);
    const EstimationReport report = execute_schedule(file.structure, schedule, source);
    write_report(out_path, file.structure, report);
    std::cout << "learned " << report.depth.size() << " parameters, "
              << report.unlearned.size() << " unlearned, " << report.failed_steps.size()
              << " failed steps\n";
    return 0;
}

int cmd_eval(const std::string& truth_path, const std::string& estimate_path,
             const std::string& out_path) {
    NetworkFile truth_file = read_network(truth_path);
    const NoisyOrParameters truth = require_params(truth_file, truth_path);
    const EstimationReport report = read_report(estimate_path, truth_file.structure);
    std::ostringstream csv;
    csv << "method,l1_error\n";
    csv << "mom," << format_double(l1_error(truth_file.structure, report.params, truth)) << '\n';
    csv << "uniform,"
        << format_double(l1_error(truth_file.structure, uniform_baseline(truth_file.structure),
                                  truth))
        << '\n';
    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        auto out = open_out(out_path);
        out << csv.str();
    }
    return 0;
}

int cmd_em(const std::string& network_path, const std::string& samples_path,
           const std::string& out_path, int inits, int max_iters, std::uint64_t seed) {
    NetworkFile file = read_network(network_path);
    const SampleBatch batch = read_samples(samples_path);
    EmOptions options;
    options.max_iters = max_iters;
    const EmTrace trace = em_fit_best_of(file.structure, batch, inits, seed, options);
    write_network(out_path, file.structure, &trace.params);
    std::cout << "em: " << trace.iterations << " iterations, final avg loglik "
              << format_double(trace.avg_loglik.back())
              << (trace.converged ? " (converged)" : " (iteration cap)") << "\n";
    return 0;
}

int cmd_identifiability_table(const std::string& out_path, int max_n, int max_m, int max_order,
                              std::uint64_t seed, int trials, bool include_leaks) {
    std::ostringstream csv;
    csv << "n";
    for (int m = 1; m <= max_m; ++m)
        csv << ',' << m;
    csv << '\n';
    for (int n = 1; n <= max_n; ++n) {
        csv << n;
        for (int m = 1; m <= max_m; ++m) {
            std::vector<std::pair<int, int>> edges;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j)
                    edges.emplace_back(i, j);
            const NetworkStructure s = NetworkStructure::from_edges(n, m, std::move(edges));
            const int order = std::min(max_order <= 0 ? m : max_order, m);
            const IdentifiabilityVerdict verdict =
                check_identifiability(s, order, seed, trials, include_leaks);
            csv << ',' << verdict.minimal_order;
        }
        csv << '\n';
    }
    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        auto out = open_out(out_path);
        out << csv.str();
    }
    return 0;
}

int cmd_cleanup(const std::string& network_path, const std::string& samples_path,
                const std::string& out_path, int parent_a, int anchor, double grid_step) {
    NetworkFile file = read_network(network_path);
    const NetworkStructure& s = file.structure;
    ResidualObservation obs;
    if (!samples_path.empty()) {
        const SampleBatch batch = read_samples(samples_path);
        const StatStore store =
            StatStore::collect(batch, ResidualObservation::request_for(s));
        StoreMomentSource source(store);
        obs = ResidualObservation::from_source(source, s);
    } else {
        const NoisyOrParameters params = require_params(file, network_path);
        obs = ResidualObservation::exact(s, params);
    }
    CleanupResult result;
    int used_parent = parent_a;
    int used_anchor = anchor;
    if (parent_a < 0 || anchor < 0) {
        AnchoredCleanup run = cleanup_best_anchor(s, obs, grid_step);
        result = std::move(run.result);
        used_parent = run.parent;
        used_anchor = run.anchor_symptom;
    } else {
        result = cleanup_grid_search(s, obs, parent_a, anchor, grid_step);
    }
    write_network(out_path, s, &result.params);
    std::cout << "cleanup argmin (parent " << used_parent << ", anchor symptom " << used_anchor
              << "): prior " << format_double(result.anchor_prior) << ", failure "
              << format_double(result.anchor_failure) << ", objective "
              << format_double(result.objective) << "\n";
    return 0;
}

int cmd_experiment(const std::string& structure_path, const std::string& out_path,
                   const std::vector<std::uint64_t>& n_grid, int reps, std::uint64_t seed,
                   bool use_pairs, bool with_em, bool with_uniform, int em_inits,
                   int em_max_iters, double lo, double hi, double leak, bool no_timing) {
    RecoveryConfig config;
    config.structure =
        structure_path.empty() ? demo_structure() : read_network(structure_path).structure;
    config.gen.lo = lo;
    config.gen.hi = hi;
    config.gen.leak = leak;
    if (!n_grid.empty())
        config.n_grid = n_grid;
    config.reps = reps;
    config.seed = seed;
    config.use_pairs = use_pairs;
    config.with_em = with_em;
    config.with_uniform = with_uniform;
    config.em_inits = em_inits;
    config.em.max_iters = em_max_iters;
    config.timing = !no_timing;
    if (out_path.empty()) {
        write_recovery_csv(std::cout, run_recovery_experiment(config));
    } else {
        // Validate the output path before hours of compute, not after.
        auto out = open_out(out_path);
        write_recovery_csv(out, run_recovery_experiment(config));
    }
    return 0;
}

int cmd_depth_report(const std::string& structure_path, const std::string& out_path) {
    const NetworkStructure s = read_network(structure_path).structure;
    const auto rows = run_depth_report(s);
    if (out_path.empty()) {
        write_depth_csv(std::cout, rows);
    } else {
        auto out = open_out(out_path);
        write_depth_csv(out, rows);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Method-of-moments learning for bipartite noisy-or networks"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "write a random network file");
    std::string g_out;
    int g_n = 2, g_m = 5, g_deg_lo = 1, g_deg_hi = 1;
    std::uint64_t g_seed = 0;
    double g_lo = 0.2, g_hi = 0.8, g_leak = 0.01, g_zipf_s = 1.5, g_zipf_top = 0.1;
    bool g_zipf = false, g_structure_only = false;
    generate->add_option("--out", g_out)->required();
    generate->add_option("--n", g_n);
    generate->add_option("--m", g_m);
    generate->add_option("--degree-lo", g_deg_lo);
    generate->add_option("--degree-hi", g_deg_hi);
    generate->add_option("--seed", g_seed);
    generate->add_option("--lo", g_lo);
    generate->add_option("--hi", g_hi);
    generate->add_option("--leak", g_leak);
    generate->add_flag("--zipf", g_zipf, "Zipf-law priors instead of uniform");
    generate->add_option("--zipf-exponent", g_zipf_s);
    generate->add_option("--zipf-top", g_zipf_top);
    generate->add_flag("--structure-only", g_structure_only);

    // sample
    auto* sample = app.add_subcommand("sample", "draw samples from a network file");
    std::string s_structure, s_out;
    std::uint64_t s_n = 1000, s_seed = 0;
    int s_shards = 1;
    sample->add_option("--structure", s_structure)->required();
    sample->add_option("--out", s_out)->required();
    sample->add_option("--n-samples", s_n);
    sample->add_option("--seed", s_seed);
    sample->add_option("--shards", s_shards);

    // schedule
    auto* schedule = app.add_subcommand("schedule", "find a learning schedule");
    std::string sc_structure, sc_out;
    bool sc_pairs = false;
    schedule->add_option("--structure", sc_structure)->required();
    schedule->add_option("--out", sc_out)->required();
    schedule->add_flag("--use-pairs", sc_pairs);

    // collect
    auto* collect = app.add_subcommand("collect", "one-pass sufficient statistics");
    std::string c_samples, c_schedule, c_structure, c_out;
    collect->add_option("--samples", c_samples)->required();
    collect->add_option("--schedule", c_schedule)->required();
    collect->add_option("--structure", c_structure)->required();
    collect->add_option("--out", c_out)->required();

    // learn
    auto* learn = app.add_subcommand("learn", "execute a schedule against a store");
    std::string l_store, l_schedule, l_structure, l_out;
    learn->add_option("--store", l_store)->required();
    learn->add_option("--schedule", l_schedule)->required();
    learn->add_option("--structure", l_structure)->required();
    learn->add_option("--out", l_out)->required();

    // eval
    auto* eval = app.add_subcommand("eval", "L1 error of a report against the truth");
    std::string e_truth, e_params, e_out;
    eval->add_option("--structure", e_truth, "network file with the true parameters")
        ->required();
    eval->add_option("--params", e_params, "estimation report")->required();
    eval->add_option("--out", e_out);

    // em
    auto* em = app.add_subcommand("em", "exact-inference EM baseline");
    std::string em_structure, em_samples, em_out;
    int em_inits = 4, em_max_iters = 500;
    std::uint64_t em_seed = 0;
    em->add_option("--structure", em_structure)->required();
    em->add_option("--samples", em_samples)->required();
    em->add_option("--out", em_out)->required();
    em->add_option("--em-inits", em_inits);
    em->add_option("--em-max-iters", em_max_iters);
    em->add_option("--seed", em_seed);

    // identifiability-table
    auto* table = app.add_subcommand("identifiability-table",
                                     "minimal identifying moment order per (n, m)");
    std::string t_out;
    int t_max_n = 7, t_max_m = 7, t_max_order = 0, t_trials = 3;
    std::uint64_t t_seed = 0;
    bool t_exclude_leaks = false;
    table->add_option("--out", t_out);
    table->add_option("--max-n", t_max_n);
    table->add_option("--max-m", t_max_m);
    table->add_option("--max-order", t_max_order, "0 means up to m");
    table->add_option("--seed", t_seed);
    table->add_option("--trials", t_trials);
    table->add_flag("--exclude-leaks", t_exclude_leaks);

    // cleanup
    auto* cleanup = app.add_subcommand("cleanup", "grid search for a 2-parent residual");
    std::string cl_structure, cl_samples, cl_out;
    int cl_parent = -1, cl_anchor = -1;
    double cl_step = 0.005;
    cleanup->add_option("--structure", cl_structure)->required();
    cleanup->add_option("--samples", cl_samples,
                        "empirical moments from samples; omit to use the file's parameters");
    cleanup->add_option("--out", cl_out)->required();
    cleanup->add_option("--parent", cl_parent,
                        "anchor parent index (default: pick by best objective)");
    cleanup->add_option("--anchor", cl_anchor, "anchor symptom index");
    cleanup->add_option("--grid-step", cl_step);

    // experiment
    auto* experiment = app.add_subcommand("experiment", "recovery experiment CSV");
    std::string x_structure, x_out;
    std::vector<std::uint64_t> x_grid;
    int x_reps = 10, x_em_inits = 4, x_em_max_iters = 500;
    std::uint64_t x_seed = 0;
    bool x_pairs = false, x_em = false, x_uniform = false, x_no_timing = false;
    double x_lo = 0.2, x_hi = 0.8, x_leak = 0.01;
    experiment->add_option("--structure", x_structure, "defaults to the built-in demo network");
    experiment->add_option("--out", x_out);
    experiment->add_option("--n-grid", x_grid)->delimiter(',');
    experiment->add_option("--reps", x_reps);
    experiment->add_option("--seed", x_seed);
    experiment->add_flag("--use-pairs", x_pairs);
    experiment->add_flag("--with-em", x_em);
    experiment->add_flag("--with-uniform", x_uniform);
    experiment->add_option("--em-inits", x_em_inits);
    experiment->add_option("--em-max-iters", x_em_max_iters);
    experiment->add_option("--lo", x_lo);
    experiment->add_option("--hi", x_hi);
    experiment->add_option("--leak", x_leak);
    experiment->add_flag("--no-timing", x_no_timing, "write wall_ms = 0 for byte-stable output");

    // depth-report
    auto* depth = app.add_subcommand("depth-report", "remaining-parameter curve per depth");
    std::string d_structure, d_out;
    depth->add_option("--structure", d_structure)->required();
    depth->add_option("--out", d_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed())
            return cmd_generate(g_out, g_n, g_m, g_deg_lo, g_deg_hi, g_seed, g_lo, g_hi, g_leak,
                                g_zipf, g_zipf_s, g_zipf_top, g_structure_only);
        if (sample->parsed())
            return cmd_sample(s_structure, s_out, s_n, s_seed, s_shards);
        if (schedule->parsed())
            return cmd_schedule(sc_structure, sc_out, sc_pairs);
        if (collect->parsed())
            return cmd_collect(c_samples, c_schedule, c_structure, c_out);
        if (learn->parsed())
            return cmd_learn(l_store, l_schedule, l_structure, l_out);
        if (eval->parsed())
            return cmd_eval(e_truth, e_params, e_out);
        if (em->parsed())
            return cmd_em(em_structure, em_samples, em_out, em_inits, em_max_iters, em_seed);
        if (table->parsed())
            return cmd_identifiability_table(t_out, t_max_n, t_max_m, t_max_order, t_seed,
                                             t_trials, !t_exclude_leaks);
        if (cleanup->parsed())
            return cmd_cleanup(cl_structure, cl_samples, cl_out, cl_parent, cl_anchor, cl_step);
        if (experiment->parsed())
            return cmd_experiment(x_structure, x_out, x_grid, x_reps, x_seed, x_pairs, x_em,
                                  x_uniform, x_em_inits, x_em_max_iters, x_lo, x_hi, x_leak,
                                  x_no_timing);
        if (depth->parsed())
            return cmd_depth_report(d_structure, d_out);
    } catch (const noisyor::NoisyOrError& e) {
        std::cerr << "{\"error\":\"" << noisyor::error_code_name(e.code())
                  << "\",\"message\":\"" << e.what() << "\"}\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "{\"error\":\"unexpected\",\"message\":\"" << e.what() << "\"}\n";
        return 1;
    }
    return 0;
}
