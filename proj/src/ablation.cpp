#include "slowfast/ablation.hpp"

#include "slowfast/config.hpp"
#include "slowfast/error.hpp"
#include "slowfast/metrics.hpp"
#include "slowfast/rng.hpp"
#include "slowfast/sampling.hpp"
#include "slowfast/svg.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include <fmt/format.h>

namespace slowfast {

namespace {

constexpr std::pair<Variant, const char*> kVariantNames[] = {
    {Variant::base_only, "base_only"},
    {Variant::slow_fast, "slow_fast"},
    {Variant::slow_plus_base, "slow_plus_base"},
    {Variant::base_plus_fast, "base_plus_fast"},
    {Variant::single_identical, "single_identical"},
    {Variant::single_uniform, "single_uniform"},
};

ArmSpec arm(std::string id, Variant v, std::size_t k_slow, std::size_t k_fast, std::size_t n = 1,
            DataSource source = DataSource::data) {
    return {std::move(id), v, k_slow, k_fast, n, source};
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation; zero for fewer than two values.
double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) {
        acc += (x - m) * (x - m);
    }
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::string safe_name(const std::string& id) {
    std::string out = id;
    for (char& c : out) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '+')) {
            c = '_';
        }
    }
    return out;
}

} // namespace

std::string to_string(Variant v) {
    for (const auto& [value, name] : kVariantNames) {
        if (value == v) {
            return name;
        }
    }
    return "unknown";
}

Variant parse_variant(const std::string& text) {
    for (const auto& [value, name] : kVariantNames) {
        if (text == name) {
            return value;
        }
    }
    throw ConfigError("unknown ablation variant '" + text + "'");
}

nlohmann::json ArmSpec::to_json() const {
    return {{"id", id},
            {"variant", to_string(variant)},
            {"k_slow", k_slow},
            {"k_fast", k_fast},
            {"train_size", train_size},
            {"source", source == DataSource::data ? "data" : "gaussian_noise"}};
}

ArmSpec ArmSpec::from_json(const nlohmann::json& j) {
    ArmSpec a;
    a.id = j.at("id").get<std::string>();
    a.variant = parse_variant(j.at("variant").get<std::string>());
    a.k_slow = j.at("k_slow").get<std::size_t>();
    a.k_fast = j.at("k_fast").get<std::size_t>();
    a.train_size = j.at("train_size").get<std::size_t>();
    const auto source = j.at("source").get<std::string>();
    if (source != "data" && source != "gaussian_noise") {
        throw ConfigError("unknown arm data source '" + source + "'");
    }
    a.source = source == "data" ? DataSource::data : DataSource::gaussian_noise;
    return a;
}

std::vector<ArmSpec> stage_arms() {
    return {arm("slow3-fast5", Variant::slow_fast, 3, 5),
            arm("slow3+base5", Variant::slow_plus_base, 3, 5),
            arm("base3+fast5", Variant::base_plus_fast, 3, 5),
            arm("single-identical", Variant::single_identical, 3, 5),
            arm("single-uniform", Variant::single_uniform, 3, 5)};
}

std::vector<ArmSpec> data_scaling_arms() {
    return {arm("base5+5", Variant::base_only, 5, 5),
            arm("slow5-fast5-n1", Variant::slow_fast, 5, 5, 1),
            arm("slow5-fast5-n10", Variant::slow_fast, 5, 5, 10),
            arm("slow5-fast5-n100", Variant::slow_fast, 5, 5, 100)};
}

std::vector<ArmSpec> timestep_arms() {
    return {arm("slow3-fast5", Variant::slow_fast, 3, 5),
            arm("slow5-fast5", Variant::slow_fast, 5, 5),
            arm("slow5-fast10", Variant::slow_fast, 5, 10)};
}

std::vector<ArmSpec> noise_control_arms() {
    return {arm("slow5-fast5-data", Variant::slow_fast, 5, 5, 1, DataSource::data),
            arm("slow5-fast5-noise", Variant::slow_fast, 5, 5, 1, DataSource::gaussian_noise)};
}

nlohmann::json AblationSettings::to_json() const {
    return {{"data", slowfast::to_json(data)},
            {"distill", slowfast::to_json(distill)},
            {"adapter", slowfast::to_json(adapter)},
            {"partition", slowfast::to_json(partition)},
            {"grid_steps", grid_steps},
            {"teacher_steps", teacher_steps},
            {"n_generate", n_generate},
            {"n_reference", n_reference},
            {"n_proj", n_proj},
            {"parallel", parallel}};
}

AblationSettings AblationSettings::from_json(const nlohmann::json& j) {
    AblationSettings s;
    s.data = dataset_from_json(j.at("data"));
    s.distill = train_config_from_json(j.at("distill"));
    s.adapter = adapter_config_from_json(j.at("adapter"));
    s.partition = partition_mode_from_json(j.at("partition"));
    s.grid_steps = j.at("grid_steps").get<std::size_t>();
    s.teacher_steps = j.at("teacher_steps").get<std::size_t>();
    s.n_generate = j.at("n_generate").get<std::size_t>();
    s.n_reference = j.at("n_reference").get<std::size_t>();
    s.n_proj = j.at("n_proj").get<std::size_t>();
    s.parallel = j.at("parallel").get<bool>();
    return s;
}

const MetricReport* AblationResult::find(const std::string& config_id, std::uint64_t seed) const {
    for (const MetricReport& r : rows) {
        if (r.config_id == config_id && r.seed == seed) {
            return &r;
        }
    }
    return nullptr;
}

std::vector<MetricReport> AblationResult::for_config(const std::string& config_id) const {
    std::vector<MetricReport> out;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
                 [&](const MetricReport& r) { return r.config_id == config_id; });
    return out;
}

std::string AblationResult::render_table() const {
    std::vector<std::string> order;
    for (const MetricReport& r : rows) {
        if (std::find(order.begin(), order.end(), r.config_id) == order.end()) {
            order.push_back(r.config_id);
        }
    }
    std::string out =
        "| config | nfe | seeds | endpoint_mse | energy_distance | sliced_w2 |\n"
        "|---|---|---|---|---|---|\n";
    for (const std::string& id : order) {
        std::vector<double> mse, ed, sw;
        std::size_t nfe_value = 0;
        for (const MetricReport& r : for_config(id)) {
            mse.push_back(r.endpoint_mse);
            ed.push_back(r.energy_distance);
            sw.push_back(r.sliced_w2);
            nfe_value = r.nfe;
        }
        out += fmt::format("| {} | {} | {} | {:.5f} ± {:.5f} | {:.5f} ± {:.5f} | {:.5f} ± {:.5f} |\n", id,
                           nfe_value, mse.size(), mean_of(mse), stddev_of(mse), mean_of(ed), stddev_of(ed),
                           mean_of(sw), stddev_of(sw));
    }
    if (!failures.empty()) {
        out += "\nFailed arms:\n";
        for (const ArmFailure& f : failures) {
            out += fmt::format("- {} seed {}: {}\n", f.config_id, f.seed, f.message);
        }
    }
    return out;
}

std::string AblationResult::to_csv() const {
    std::string out = "config,seed,nfe,endpoint_mse,energy_distance,sliced_w2,wall_time_s\n";
    for (const MetricReport& r : rows) {
        out += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.config_id, r.seed, r.nfe, r.endpoint_mse,
                           r.energy_distance, r.sliced_w2, r.wall_time_s);
    }
    return out;
}

void AblationResult::write_csv(const std::filesystem::path& path) const { write_file_atomic(path, to_csv()); }

void AblationResult::write_figures(const std::filesystem::path& directory) const {
    std::filesystem::create_directories(directory);
    std::vector<std::string> labels;
    std::vector<double> values;
    for (const MetricReport& r : rows) {
        if (std::find(labels.begin(), labels.end(), r.config_id) != labels.end()) {
            continue;
        }
        std::vector<double> mse;
        for (const MetricReport& c : for_config(r.config_id)) {
            mse.push_back(c.endpoint_mse);
        }
        labels.push_back(r.config_id);
        values.push_back(mean_of(mse));
    }
    write_file_atomic(directory / "endpoint_mse.svg", bar_chart_svg("Mean endpoint MSE", labels, values));
    for (const auto& [id, points] : first_seed_samples) {
        const std::vector<ScatterSeries> series = {{"teacher", &first_seed_teacher, "#999999"},
                                                   {id, &points, "#d62728"}};
        write_file_atomic(directory / ("scatter_" + safe_name(id) + ".svg"), scatter_svg(id, series));
    }
}

SeedContext make_seed_context(const VelocityField& teacher, const AblationSettings& settings, std::uint64_t seed) {
    const ModelSpec& spec = teacher.spec();
    SeedContext ctx;
    ctx.seed = seed;
    ctx.noise = Tensor(settings.n_generate, spec.data_dim);
    const CounterRng noise_rng(seed, Stream::eval_noise);
    for (std::size_t i = 0; i < ctx.noise.size(); ++i) {
        ctx.noise[i] = noise_rng.normal_at(2 * static_cast<std::uint64_t>(i));
    }
    if (spec.conditional()) {
        ctx.classes.resize(settings.n_generate);
        for (std::size_t i = 0; i < settings.n_generate; ++i) {
            ctx.classes[i] = static_cast<int>(i % spec.num_classes);
        }
    }
    ctx.teacher_terminal = teacher_sample(teacher, settings.teacher_steps, ctx.noise, ctx.classes).terminal();
    Dataset2D reference = settings.data;
    reference.seed = CounterRng(seed, Stream::eval_reference).bits_at(0);
    ctx.reference = sample(reference, settings.n_reference);
    return ctx;
}

MetricReport run_arm(const VelocityField& teacher, const AblationSettings& settings, const ArmSpec& arm,
                     const SeedContext& context, Tensor* terminal) {
    if (arm.k_slow == 0 || arm.k_fast == 0) {
        throw ConfigError("arm " + arm.id + ": k_slow and k_fast must be at least 1");
    }
    const TimeGrid grid = TimeGrid::uniform(settings.grid_steps);
    const PhasePartition part = partition(grid, settings.partition);

    TrainSet trainset = subset(settings.data, arm.train_size, context.seed);
    if (arm.source == DataSource::gaussian_noise) {
        TrainSet noise_set = subset(Dataset2D::gaussian({0.0, 0.0}, 1.0, 0), arm.train_size, context.seed);
        noise_set.samples.classes = trainset.samples.classes;
        trainset = std::move(noise_set);
    }
    TrainConfig cfg = settings.distill;
    cfg.seed = context.seed;
    const auto train = [&](Phase phase) {
        return distill_expert(teacher, phase, part, trainset, cfg, settings.adapter).adapter;
    };

    PhaseSchedule schedule = allocate(grid, part, arm.k_slow, arm.k_fast);
    ExpertSet experts;
    switch (arm.variant) {
    case Variant::base_only:
        experts = ExpertSet::bare();
        break;
    case Variant::slow_fast:
        experts = ExpertSet::slow_fast(train(Phase::slow), train(Phase::fast));
        break;
    case Variant::slow_plus_base:
        experts = ExpertSet::slow_only(train(Phase::slow));
        break;
    case Variant::base_plus_fast:
        experts = ExpertSet::fast_only(train(Phase::fast));
        break;
    case Variant::single_identical:
        experts = ExpertSet::single_adapter(train(Phase::full));
        break;
    case Variant::single_uniform:
        experts = ExpertSet::single_adapter(train(Phase::full));
        schedule = uniform_schedule(grid, part, arm.k_slow + arm.k_fast);
        break;
    }

    const Trajectory traj = generate(teacher, experts, schedule, context.noise, context.classes);
    const Tensor& out = traj.terminal();
    MetricReport report;
    report.config_id = arm.id;
    report.seed = context.seed;
    report.nfe = traj.nfe;
    report.endpoint_mse = endpoint_mse(out, context.teacher_terminal);
    report.energy_distance = energy_distance(out, context.reference);
    report.sliced_w2 = sliced_w2(out, context.reference, settings.n_proj, context.seed);
    report.wall_time_s = traj.wall_time_s;
    if (terminal != nullptr) {
        *terminal = out;
    }
    return report;
}

AblationResult run_ablation(const VelocityField& teacher, const AblationSettings& settings,
                            std::span<const std::uint64_t> seeds, std::span<const ArmSpec> arms) {
    for (std::size_t i = 0; i < arms.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (arms[i].id == arms[j].id) {
                throw ContractError("duplicate ablation arm id '" + arms[i].id + "'");
            }
        }
    }
    std::vector<SeedContext> contexts(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        contexts[s] = make_seed_context(teacher, settings, seeds[s]);
    }

    struct Outcome {
        std::optional<MetricReport> report;
        std::string error;
        Tensor terminal;
    };
    const std::size_t n_tasks = arms.size() * seeds.size();
    std::vector<Outcome> outcomes(n_tasks);
    const auto run_task = [&](std::size_t t) {
        const std::size_t a = t / seeds.size();
        const std::size_t s = t % seeds.size();
        try {
            outcomes[t].report = run_arm(teacher, settings, arms[a], contexts[s], s == 0 ? &outcomes[t].terminal : nullptr);
        } catch (const std::exception& e) {
            outcomes[t].error = e.what();
        }
    };
    const auto n = static_cast<std::ptrdiff_t>(n_tasks);
#pragma omp parallel for schedule(dynamic) if (settings.parallel)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        run_task(static_cast<std::size_t>(t));
    }

    AblationResult result;
    if (!contexts.empty()) {
        result.first_seed_teacher = contexts.front().teacher_terminal;
    }
    for (std::size_t t = 0; t < n_tasks; ++t) {
        const std::size_t a = t / seeds.size();
        const std::size_t s = t % seeds.size();
        if (outcomes[t].report) {
            result.rows.push_back(*outcomes[t].report);
            if (s == 0) {
                result.first_seed_samples.emplace_back(arms[a].id, std::move(outcomes[t].terminal));
            }
        } else {
            result.failures.push_back({arms[a].id, seeds[s], outcomes[t].error});
        }
    }
    return result;
}

} // namespace slowfast
