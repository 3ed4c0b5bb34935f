#include "noisyor/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <future>
#include <thread>

#include "noisyor/io.hpp"
#include "noisyor/moments.hpp"
#include "noisyor/rng.hpp"

namespace noisyor {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<RecoveryRow> run_one_network(const RecoveryConfig& config, const Schedule& schedule,
                                         int network) {
    std::vector<RecoveryRow> rows;
    GeneratorConfig gen = config.gen;
    gen.seed = Rng::derive(config.seed, static_cast<std::uint64_t>(2 * network));
    const NoisyOrParameters truth = random_parameters(config.structure, gen);
    const std::uint64_t n_max = *std::max_element(config.n_grid.begin(), config.n_grid.end());
    const SampleBatch batch =
        draw_samples(config.structure, truth, n_max,
                     Rng::derive(config.seed, static_cast<std::uint64_t>(2 * network + 1)));
    const StatRequest request = schedule_request(schedule);

    for (std::uint64_t n : config.n_grid) {
        {
            const auto start = Clock::now();
            const StatStore store = StatStore::collect(batch, request, 0, n);
            StoreMomentSource source(store);
            const EstimationReport report =
                execute_schedule(config.structure, schedule, source);
            const double l1 = l1_error(config.structure, report.params, truth);
            rows.push_back({network, n, "mom", l1, config.timing ? elapsed_ms(start) : 0.0});
        }
        if (config.with_uniform) {
            const auto start = Clock::now();
            const double l1 =
                l1_error(config.structure, uniform_baseline(config.structure), truth);
            rows.push_back({network, n, "uniform", l1, config.timing ? elapsed_ms(start) : 0.0});
        }
        if (config.with_em) {
            const auto start = Clock::now();
            const SampleBatch prefix = batch.prefix(n);
            const EmTrace trace = em_fit_best_of(
                config.structure, prefix, config.em_inits,
                Rng::derive(config.seed, 0x454D00ULL + static_cast<std::uint64_t>(network)),
                config.em);
            const double l1 = l1_error(config.structure, trace.params, truth);
            rows.push_back({network, n, "em", l1, config.timing ? elapsed_ms(start) : 0.0});
        }
    }
    return rows;
}

}  // namespace

int thread_budget(int requested) {
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("NOISYOR_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed > 0)
            return parsed;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<RecoveryRow> run_recovery_experiment(const RecoveryConfig& config) {
    require(!config.n_grid.empty(), ErrorCode::InvalidArgument, "empty sample-size grid");
    require(config.reps >= 0, ErrorCode::InvalidArgument, "negative repetition count");
    std::vector<RecoveryRow> rows;
    if (config.reps == 0)
        return rows;
    const Schedule schedule = find_schedule(config.structure, config.use_pairs);

    const int threads = std::min(thread_budget(config.threads), config.reps);
    std::vector<std::future<std::vector<RecoveryRow>>> futures;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t) {
        futures.push_back(std::async(std::launch::async, [&]() {
            std::vector<RecoveryRow> local;
            for (;;) {
                const int network = next.fetch_add(1);
                if (network >= config.reps)
                    break;
                auto batch_rows = run_one_network(config, schedule, network);
                local.insert(local.end(), batch_rows.begin(), batch_rows.end());
            }
            return local;
        }));
    }
    for (auto& future : futures) {
        auto local = future.get();
        rows.insert(rows.end(), local.begin(), local.end());
    }
    std::sort(rows.begin(), rows.end(), [](const RecoveryRow& a, const RecoveryRow& b) {
        if (a.network != b.network)
            return a.network < b.network;
        if (a.n != b.n)
            return a.n < b.n;
        return a.method < b.method;
    });
    return rows;
}

void write_recovery_csv(std::ostream& out, const std::vector<RecoveryRow>& rows) {
    out << "network,N,method,l1_error,wall_ms\n";
    for (const auto& row : rows)
        out << row.network << ',' << row.n << ',' << row.method << ','
            << format_double(row.l1) << ',' << format_double(row.wall_ms) << '\n';
}

std::vector<DepthReportRow> run_depth_report(const NetworkStructure& s) {
    std::vector<DepthReportRow> rows;
    const long total = s.disease_count() + static_cast<long>(s.edge_count());
    for (bool pairs : {false, true}) {
        const std::string method = pairs ? "triplets+pairs" : "triplets";
        const Schedule schedule = find_schedule(s, pairs);
        rows.push_back({method, -1, total});
        long remaining = total;
        for (const auto& round : schedule.rounds) {
            long learned = 0;
            bool counting_round = false;
            for (const auto& step : round) {
                if (step.kind == StepKind::Noise)
                    continue;  // leaks are excluded from the curve
                counting_round = true;
                learned += static_cast<long>(step.targets.size());
            }
            if (!counting_round)
                continue;
            remaining -= learned;
            rows.push_back({method, round.front().round, remaining});
        }
    }
    return rows;
}

void write_depth_csv(std::ostream& out, const std::vector<DepthReportRow>& rows) {
    out << "method,depth,remaining\n";
    for (const auto& row : rows)
        out << row.method << ',' << row.depth << ',' << row.remaining << '\n';
}

}  // namespace noisyor
