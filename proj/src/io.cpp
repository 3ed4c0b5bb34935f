#include "noisyor/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace noisyor {

using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::IoError, "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path + ": " + e.what());
    }
    return j;
}

void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    require(out.good(), ErrorCode::IoError, "cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    require(out.good(), ErrorCode::IoError, "write to " + path + " failed");
}

}  // namespace

NetworkFile read_network(const std::string& path) {
    const json j = load_json(path);
    try {
        const int n = j.at("n").get<int>();
        const int m = j.at("m").get<int>();
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : j.at("edges"))
            edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        NetworkFile file;
        file.structure = NetworkStructure::from_edges(n, m, std::move(edges));
        const bool has_params = j.contains("priors") || j.contains("failures") ||
                                j.contains("leaks");
        if (has_params) {
            require(j.contains("priors") && j.contains("failures") && j.contains("leaks"),
                    ErrorCode::ParseError,
                    path + ": priors, failures and leaks must be given together");
            NoisyOrParameters params;
            params.priors = j.at("priors").get<std::vector<double>>();
            params.leaks = j.at("leaks").get<std::vector<double>>();
            params.failures.assign(file.structure.edge_count(), 1.0);
            for (const auto& f : j.at("failures")) {
                const int i = f.at(0).get<int>();
                const int jj = f.at(1).get<int>();
                const int e = file.structure.edge_index(i, jj);
                require(e >= 0, ErrorCode::ParseError,
                        path + ": failure entry for non-edge (" + std::to_string(i) + "," +
                            std::to_string(jj) + ")");
                params.failures[static_cast<std::size_t>(e)] = f.at(2).get<double>();
            }
            require(params.priors.size() == static_cast<std::size_t>(n) &&
                        params.leaks.size() == static_cast<std::size_t>(m),
                    ErrorCode::ParseError, path + ": parameter array lengths mismatch");
            file.params = std::move(params);
        }
        return file;
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path + ": " + e.what());
    }
}

void write_network(const std::string& path, const NetworkStructure& s,
                   const NoisyOrParameters* params) {
    json j;
    j["n"] = s.disease_count();
    j["m"] = s.symptom_count();
    json edges = json::array();
    for (auto [i, jj] : s.edges())
        edges.push_back({i, jj});
    j["edges"] = std::move(edges);
    if (params) {
        j["priors"] = params->priors;
        json failures = json::array();
        for (std::size_t e = 0; e < s.edge_count(); ++e)
            failures.push_back(
                {s.edges()[e].first, s.edges()[e].second, params->failures[e]});
        j["failures"] = std::move(failures);
        j["leaks"] = params->leaks;
    }
    save_json(path, j);
}

SampleBatch read_samples_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::IoError, "cannot open " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::ParseError,
            path + ": missing header");
    int m = line.empty() ? 0 : 1;
    for (char c : line)
        if (c == ',')
            ++m;
    SampleBatch batch;
    batch.m = m;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        int seen = 0;
        for (std::size_t pos = 0; pos < line.size();) {
            const char c = line[pos];
            require(c == '0' || c == '1', ErrorCode::ParseError,
                    path + ": sample values must be 0 or 1");
            batch.data.push_back(c == '1' ? 1 : 0);
            ++seen;
            pos += 2;  // value plus separator
        }
        require(seen == m, ErrorCode::WidthMismatch, path + ": row width mismatch");
    }
    return batch;
}

void write_samples_csv(const std::string& path, const SampleBatch& batch) {
    std::ofstream out(path);
    require(out.good(), ErrorCode::IoError, "cannot open " + path + " for writing");
    for (int j = 0; j < batch.m; ++j)
        out << (j ? ",s" : "s") << j;
    out << '\n';
    std::string line;
    for (std::uint64_t r = 0; r < batch.size(); ++r) {
        line.clear();
        const std::uint8_t* row = batch.row(r);
        for (int j = 0; j < batch.m; ++j) {
            if (j)
                line.push_back(',');
            line.push_back(row[j] ? '1' : '0');
        }
        line.push_back('\n');
        out << line;
    }
    require(out.good(), ErrorCode::IoError, "write to " + path + " failed");
}

namespace {

constexpr char kPackedMagic[4] = {'N', 'O', 'B', 'S'};

}  // namespace

SampleBatch read_samples_packed(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::IoError, "cannot open " + path);
    char header[16];
    in.read(header, 16);
    require(in.gcount() == 16 && std::memcmp(header, kPackedMagic, 4) == 0,
            ErrorCode::ParseError, path + ": bad packed-sample header");
    std::uint32_t m = 0;
    std::uint64_t n = 0;
    std::memcpy(&m, header + 4, 4);
    std::memcpy(&n, header + 8, 8);
    SampleBatch batch;
    batch.m = static_cast<int>(m);
    batch.data.assign(n * m, 0);
    const std::size_t stride = (m + 7) / 8;
    std::vector<char> row(stride);
    for (std::uint64_t r = 0; r < n; ++r) {
        in.read(row.data(), static_cast<std::streamsize>(stride));
        require(in.gcount() == static_cast<std::streamsize>(stride), ErrorCode::ParseError,
                path + ": truncated packed samples");
        for (std::uint32_t j = 0; j < m; ++j)
            batch.data[r * m + j] =
                (static_cast<unsigned char>(row[j / 8]) >> (j % 8)) & 1;
    }
    return batch;
}

void write_samples_packed(const std::string& path, const SampleBatch& batch) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCode::IoError, "cannot open " + path + " for writing");
    char header[16] = {};
    std::memcpy(header, kPackedMagic, 4);
    const std::uint32_t m = static_cast<std::uint32_t>(batch.m);
    const std::uint64_t n = batch.size();
    std::memcpy(header + 4, &m, 4);
    std::memcpy(header + 8, &n, 8);
    out.write(header, 16);
    const std::size_t stride = (m + 7) / 8;
    std::vector<char> row(stride);
    for (std::uint64_t r = 0; r < n; ++r) {
        std::fill(row.begin(), row.end(), 0);
        const std::uint8_t* src = batch.row(r);
        for (std::uint32_t j = 0; j < m; ++j)
            if (src[j])
                row[j / 8] = static_cast<char>(row[j / 8] | (1 << (j % 8)));
        out.write(row.data(), static_cast<std::streamsize>(stride));
    }
    require(out.good(), ErrorCode::IoError, "write to " + path + " failed");
}

namespace {

bool has_extension(const std::string& path, const char* ext) {
    const std::size_t len = std::strlen(ext);
    return path.size() >= len && path.compare(path.size() - len, len, ext) == 0;
}

}  // namespace

SampleBatch read_samples(const std::string& path) {
    return has_extension(path, ".bin") ? read_samples_packed(path) : read_samples_csv(path);
}

void write_samples(const std::string& path, const SampleBatch& batch) {
    if (has_extension(path, ".bin"))
        write_samples_packed(path, batch);
    else
        write_samples_csv(path, batch);
}

StatStore read_store(const std::string& path) {
    const json j = load_json(path);
    try {
        const auto n = j.at("N").get<std::uint64_t>();
        std::vector<std::vector<int>> sets;
        std::vector<std::vector<std::uint64_t>> counts;
        for (const auto& entry : j.at("sets")) {
            sets.push_back(entry.at("ids").get<std::vector<int>>());
            counts.push_back(entry.at("counts").get<std::vector<std::uint64_t>>());
        }
        return StatStore::from_raw(n, std::move(sets), std::move(counts));
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path + ": " + e.what());
    }
}

void write_store(const std::string& path, const StatStore& store) {
    json j;
    j["N"] = store.sample_count();
    json sets = json::array();
    for (std::size_t k = 0; k < store.set_count(); ++k) {
        json entry;
        entry["ids"] = store.set_ids(k);
        auto counts = store.set_counts(k);
        entry["counts"] = std::vector<std::uint64_t>(counts.begin(), counts.end());
        sets.push_back(std::move(entry));
    }
    j["sets"] = std::move(sets);
    save_json(path, j);
}

namespace {

json step_to_json(const ScheduleStep& step) {
    json j;
    j["kind"] = step_kind_name(step.kind);
    j["disease"] = step.disease;
    j["symptoms"] = step.symptoms;
    j["adjust"] = step.adjustments;
    json targets = json::array();
    for (const auto& id : step.targets)
        targets.push_back(id.to_string());
    j["targets"] = std::move(targets);
    return j;
}

ScheduleStep step_from_json(const json& j, int round) {
    ScheduleStep step;
    step.kind = step_kind_parse(j.at("kind").get<std::string>());
    step.disease = j.at("disease").get<int>();
    step.symptoms = j.at("symptoms").get<std::vector<int>>();
    step.adjustments = j.at("adjust").get<std::vector<int>>();
    step.round = round;
    for (const auto& t : j.at("targets"))
        step.targets.push_back(ParamId::parse(t.get<std::string>()));
    if (step.kind == StepKind::Pair) {
        require(step.symptoms.size() == 2 && step.targets.size() == 1 &&
                    step.targets[0].kind == ParamKind::Failure,
                ErrorCode::ParseError, "malformed pair step");
        step.anchor_symptom = step.symptoms[0] == step.targets[0].j ? step.symptoms[1]
                                                                    : step.symptoms[0];
    }
    return step;
}

}  // namespace

Schedule read_schedule(const std::string& path, const NetworkStructure& s) {
    const json j = load_json(path);
    Schedule schedule;
    try {
        int round = 0;
        for (const auto& round_json : j.at("rounds")) {
            std::vector<ScheduleStep> steps;
            for (const auto& step_json : round_json)
                steps.push_back(step_from_json(step_json, round));
            schedule.rounds.push_back(std::move(steps));
            ++round;
        }
        for (const auto& u : j.at("unlearnable"))
            schedule.unlearnable.push_back(ParamId::parse(u.get<std::string>()));
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path + ": " + e.what());
    }
    // Depths are not serialized; replay the max-plus-one recursion.
    for (const auto& round_steps : schedule.rounds) {
        for (const auto& step : round_steps) {
            int consumed = -1;
            auto consider = [&](const ParamId& id) {
                auto it = schedule.depth.find(id.key());
                if (it != schedule.depth.end())
                    consumed = std::max(consumed, it->second);
            };
            for (int k : step.adjustments) {
                consider(ParamId::prior(k));
                for (int j2 : step.symptoms)
                    if (s.has_edge(k, j2))
                        consider(ParamId::failure(k, j2));
            }
            if (step.kind == StepKind::Pair) {
                consider(ParamId::prior(step.disease));
                consider(ParamId::failure(step.disease, step.anchor_symptom));
            }
            const int depth = consumed + 1;
            for (const auto& id : step.targets) {
                schedule.depth[id.key()] = depth;
                schedule.learned.push_back(id);
            }
        }
    }
    return schedule;
}

void write_schedule(const std::string& path, const Schedule& schedule) {
    json j;
    json rounds = json::array();
    for (const auto& round : schedule.rounds) {
        json steps = json::array();
        for (const auto& step : round)
            steps.push_back(step_to_json(step));
        rounds.push_back(std::move(steps));
    }
    j["rounds"] = std::move(rounds);
    json unlearnable = json::array();
    for (const auto& id : schedule.unlearnable)
        unlearnable.push_back(id.to_string());
    j["unlearnable"] = std::move(unlearnable);
    save_json(path, j);
}

EstimationReport read_report(const std::string& path, const NetworkStructure& s) {
    const json j = load_json(path);
    EstimationReport report = EstimationReport::empty(s);
    try {
        report.params.priors = j.at("priors").get<std::vector<double>>();
        report.params.leaks = j.at("leaks").get<std::vector<double>>();
        for (const auto& f : j.at("failures")) {
            const int e = s.edge_index(f.at(0).get<int>(), f.at(1).get<int>());
            require(e >= 0, ErrorCode::ParseError, path + ": failure entry for non-edge");
            report.params.failures[static_cast<std::size_t>(e)] = f.at(2).get<double>();
        }
        for (const auto& [key, value] : j.at("depths").items()) {
            const ParamId id = ParamId::parse(key);
            report.depth[id.key()] = value.get<int>();
            switch (id.kind) {
                case ParamKind::Prior:
                    report.prior_learned[static_cast<std::size_t>(id.i)] = 1;
                    break;
                case ParamKind::Failure:
                    report.failure_learned[static_cast<std::size_t>(s.edge_index(id.i, id.j))] =
                        1;
                    break;
                case ParamKind::Leak:
                    report.leak_learned[static_cast<std::size_t>(id.j)] = 1;
                    break;
            }
        }
        for (const auto& u : j.at("unlearned"))
            report.unlearned.push_back(ParamId::parse(u.get<std::string>()));
        for (const auto& f : j.at("failed_steps")) {
            FailedStep step;
            step.round = f.at("round").get<int>();
            step.index_in_round = f.at("index").get<int>();
            step.kind = step_kind_parse(f.at("kind").get<std::string>());
            step.disease = f.at("disease").get<int>();
            step.symptoms = f.at("symptoms").get<std::vector<int>>();
            step.error = f.at("error").get<std::string>();
            report.failed_steps.push_back(std::move(step));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path + ": " + e.what());
    }
    return report;
}

void write_report(const std::string& path, const NetworkStructure& s,
                  const EstimationReport& report) {
    json j;
    j["n"] = s.disease_count();
    j["m"] = s.symptom_count();
    json edges = json::array();
    for (auto [i, jj] : s.edges())
        edges.push_back({i, jj});
    j["edges"] = std::move(edges);
    j["priors"] = report.params.priors;
    json failures = json::array();
    for (std::size_t e = 0; e < s.edge_count(); ++e)
        failures.push_back({s.edges()[e].first, s.edges()[e].second, report.params.failures[e]});
    j["failures"] = std::move(failures);
    j["leaks"] = report.params.leaks;
    json depths = json::object();
    for (int i = 0; i < s.disease_count(); ++i)
        if (report.prior_learned[static_cast<std::size_t>(i)])
            depths[ParamId::prior(i).to_string()] = report.depth_of(ParamId::prior(i));
    for (std::size_t e = 0; e < s.edge_count(); ++e)
        if (report.failure_learned[e]) {
            const ParamId id = ParamId::failure(s.edges()[e].first, s.edges()[e].second);
            depths[id.to_string()] = report.depth_of(id);
        }
    for (int jj = 0; jj < s.symptom_count(); ++jj)
        if (report.leak_learned[static_cast<std::size_t>(jj)])
            depths[ParamId::leak(jj).to_string()] = report.depth_of(ParamId::leak(jj));
    j["depths"] = std::move(depths);
    json unlearned = json::array();
    for (const auto& id : report.unlearned)
        unlearned.push_back(id.to_string());
    j["unlearned"] = std::move(unlearned);
    json failed = json::array();
    for (const auto& step : report.failed_steps) {
        json f;
        f["round"] = step.round;
        f["index"] = step.index_in_round;
        f["kind"] = step_kind_name(step.kind);
        f["disease"] = step.disease;
        f["symptoms"] = step.symptoms;
        f["error"] = step.error;
        failed.push_back(std::move(f));
    }
    j["failed_steps"] = std::move(failed);
    save_json(path, j);
}

std::string format_double(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.12g", value);
    return buffer;
}

}  // namespace noisyor
