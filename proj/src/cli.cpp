#include "slowfast/cli.hpp"

#include "slowfast/ablation.hpp"
#include "slowfast/checkpoint.hpp"
#include "slowfast/config.hpp"
#include "slowfast/error.hpp"
#include "slowfast/manifest.hpp"
#include "slowfast/metrics.hpp"
#include "slowfast/rng.hpp"
#include "slowfast/sampling.hpp"
#include "slowfast/svg.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <omp.h>

namespace slowfast {

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string out = ".";
    std::string config;
    std::uint64_t seed = 0;
};

struct Invocation {
    std::vector<std::string> args;
    std::ostream& out;
    std::ostream& err;
};

ConfigFile load_config(const Common& c) { return c.config.empty() ? ConfigFile{} : ConfigFile::load(c.config); }

fs::path prepare_out(const Common& c) {
    fs::create_directories(c.out);
    return fs::path(c.out);
}

// Records an artifact by its path relative to the output directory.
void record(RunManifest& m, const fs::path& out_dir, const std::string& name) {
    m.artifacts.push_back({name, file_sha1(out_dir / name)});
}

RunManifest start_manifest(const Invocation& inv, const std::string& subcommand) {
    RunManifest m;
    m.argv = inv.args;
    m.subcommand = subcommand;
    return m;
}

void finish_manifest(RunManifest& m, const fs::path& out_dir, std::ostream& out) {
    const fs::path path = out_dir / (m.subcommand + ".manifest.json");
    m.save(path);
    out << "manifest: " << path.string() << "\n";
}

std::string losses_csv(const std::vector<double>& losses) {
    std::string s = "step,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) {
        s += fmt::format("{},{:.17g}\n", i, losses[i]);
    }
    return s;
}

std::string points_csv(const Tensor& x, std::span<const int> classes) {
    std::string s = "x,y,class\n";
    for (std::size_t r = 0; r < x.rows(); ++r) {
        s += fmt::format("{:.17g},{:.17g},{}\n", x(r, 0), x(r, 1), classes.empty() ? -1 : classes[r]);
    }
    return s;
}

Dataset2D teacher_dataset(const nlohmann::json& header) {
    if (header.contains("config") && header["config"].contains("data")) {
        return dataset_from_json(header["config"]["data"]);
    }
    return Dataset2D::eight_gaussians(0);
}

struct Experts {
    ExpertSet set;
    std::vector<std::string> inputs;
};

Experts load_experts(const VelocityField& teacher, const std::string& slow, const std::string& fast,
                     const std::string& single) {
    Experts e;
    const auto load = [&](const std::string& path) {
        AdapterCheckpoint ck = load_adapter(path);
        if (!(ck.base_spec == teacher.spec())) {
            throw AdapterError("adapter " + path + " was trained for a different architecture");
        }
        ck.adapter.check_compatible(teacher);
        e.inputs.push_back(path);
        return ck.adapter;
    };
    if (!single.empty()) {
        if (!slow.empty() || !fast.empty()) {
            throw ConfigError("--single cannot be combined with --slow or --fast");
        }
        e.set = ExpertSet::single_adapter(load(single));
    } else if (!slow.empty() && !fast.empty()) {
        e.set = ExpertSet::slow_fast(load(slow), load(fast));
    } else if (!slow.empty()) {
        e.set = ExpertSet::slow_only(load(slow));
    } else if (!fast.empty()) {
        e.set = ExpertSet::fast_only(load(fast));
    }
    return e;
}

struct ScheduleOptions {
    std::string schedule = "slow5-fast5";
};

PhaseSchedule build_schedule(const ConfigFile& cfg, const std::string& text) {
    std::size_t grid_steps = 50;
    PartitionMode mode;
    cfg.apply_schedule(grid_steps, mode);
    const TimeGrid grid = TimeGrid::uniform(grid_steps);
    return ScheduleSpec::parse(text).build(grid, partition(grid, mode));
}

Tensor eval_noise(std::uint64_t seed, std::size_t n, std::size_t dim) {
    Tensor noise(n, dim);
    const CounterRng rng(seed, Stream::eval_noise);
    for (std::size_t i = 0; i < noise.size(); ++i) {
        noise[i] = rng.normal_at(2 * static_cast<std::uint64_t>(i));
    }
    return noise;
}

std::vector<int> eval_classes(const ModelSpec& spec, std::size_t n, std::optional<int> fixed) {
    if (!spec.conditional()) {
        if (fixed) {
            throw ConditionError("--class given for an unconditional model");
        }
        return {};
    }
    std::vector<int> classes(n);
    for (std::size_t i = 0; i < n; ++i) {
        classes[i] = fixed ? *fixed : static_cast<int>(i % spec.num_classes);
    }
    return classes;
}

// --- train-teacher -------------------------------------------------------

struct TeacherOptions {
    Common common;
    std::optional<std::size_t> steps;
    std::string dataset;
    bool unconditional = false;
};

int cmd_train_teacher(const Invocation& inv, const TeacherOptions& o, bool seed_given) {
    const ConfigFile cfg = load_config(o.common);
    TrainConfig tc = TrainConfig::teacher_defaults();
    cfg.apply(tc);
    if (seed_given) {
        tc.seed = o.common.seed;
    }
    if (o.steps) {
        tc.steps = *o.steps;
    }
    tc.validate();
    Dataset2D data = Dataset2D::eight_gaussians(0);
    cfg.apply(data);
    if (!o.dataset.empty()) {
        data.kind = parse_dataset_kind(o.dataset);
    }
    ModelSpec spec;
    cfg.apply(spec);
    const bool conditional = cfg.get_bool("conditional", !o.unconditional) && !o.unconditional;
    spec.num_classes = conditional ? data.num_classes() : 0;

    const fs::path out_dir = prepare_out(o.common);
    const nlohmann::json echo = {{"train", to_json(tc)}, {"data", to_json(data)}, {"model", to_json(spec)}};
    const TrainResult result = train_teacher(VelocityField::init(spec, tc.seed), data, tc);

    save_teacher(out_dir / "teacher.ckpt", result.model, tc.seed, echo);
    write_file_atomic(out_dir / "teacher_losses.csv", losses_csv(result.losses));

    RunManifest m = start_manifest(inv, "train-teacher");
    m.set_config(echo);
    m.seeds = {tc.seed};
    record(m, out_dir, "teacher.ckpt");
    record(m, out_dir, "teacher_losses.csv");
    m.metrics = {{"final_loss", result.losses.back()}, {"steps", tc.steps}};
    finish_manifest(m, out_dir, inv.out);
    inv.out << fmt::format("trained teacher: {} steps, final loss {:.6f}\n", tc.steps, result.losses.back());
    return kExitOk;
}

// --- distill ---------------------------------------------------------------

struct DistillOptions {
    Common common;
    std::string teacher;
    std::string phase = "both";
    std::size_t samples = 1;
    std::optional<std::size_t> steps;
};

int cmd_distill(const Invocation& inv, const DistillOptions& o, bool seed_given) {
    const ConfigFile cfg = load_config(o.common);
    nlohmann::json header;
    const VelocityField teacher = load_teacher(o.teacher, &header);
    TrainConfig tc = TrainConfig::distill_defaults();
    cfg.apply(tc);
    if (seed_given) {
        tc.seed = o.common.seed;
    }
    if (o.steps) {
        tc.steps = *o.steps;
    }
    tc.validate();
    AdapterConfig ac;
    cfg.apply(ac);
    std::size_t grid_steps = 50;
    PartitionMode mode;
    cfg.apply_schedule(grid_steps, mode);
    const PhasePartition part = partition(TimeGrid::uniform(grid_steps), mode);
    Dataset2D data = teacher_dataset(header);
    cfg.apply(data);
    if (o.samples == 0) {
        throw ConfigError("--samples must be at least 1");
    }

    std::vector<Phase> phases;
    if (o.phase == "both") {
        phases = {Phase::slow, Phase::fast};
    } else {
        phases = {parse_phase(o.phase)};
    }

    const fs::path out_dir = prepare_out(o.common);
    const TrainSet trainset = subset(data, o.samples, tc.seed);
    write_trainset_csv(trainset, out_dir / "trainset.csv");

    const nlohmann::json echo = {{"train", to_json(tc)},         {"adapter", to_json(ac)},
                                 {"partition", to_json(mode)},   {"grid_steps", grid_steps},
                                 {"data", to_json(data)},        {"samples", o.samples},
                                 {"phase", o.phase}};
    RunManifest m = start_manifest(inv, "distill");
    m.set_config(echo);
    m.seeds = {tc.seed};
    m.add_input(o.teacher);
    record(m, out_dir, "trainset.csv");
    for (Phase phase : phases) {
        const DistillResult r = distill_expert(teacher, phase, part, trainset, tc, ac);
        const std::string name = phase == Phase::full ? "single" : to_string(phase);
        save_adapter(out_dir / (name + ".ckpt"), r.adapter, teacher.spec(), name, tc.seed, echo);
        write_file_atomic(out_dir / (name + "_losses.csv"), losses_csv(r.losses));
        record(m, out_dir, name + ".ckpt");
        record(m, out_dir, name + "_losses.csv");
        m.metrics[name + "_final_loss"] = r.losses.back();
        inv.out << fmt::format("distilled {} expert on {} sample(s): {} steps, final loss {:.6f}\n", name,
                               o.samples, tc.steps, r.losses.back());
    }
    finish_manifest(m, out_dir, inv.out);
    return kExitOk;
}

// --- sample / eval -------------------------------------------------------

struct SampleOptions {
    Common common;
    std::string teacher;
    std::string slow;
    std::string fast;
    std::string single;
    std::string schedule = "slow5-fast5";
    std::size_t n = 2048;
    std::optional<int> cls;
    bool trajectory = false;
};

int cmd_sample(const Invocation& inv, const SampleOptions& o) {
    const ConfigFile cfg = load_config(o.common);
    const VelocityField teacher = load_teacher(o.teacher);
    const Experts experts = load_experts(teacher, o.slow, o.fast, o.single);
    const PhaseSchedule schedule = build_schedule(cfg, o.schedule);
    const Tensor noise = eval_noise(o.common.seed, o.n, teacher.spec().data_dim);
    const std::vector<int> classes = eval_classes(teacher.spec(), o.n, o.cls);
    const Trajectory traj = generate(teacher, experts.set, schedule, noise, classes);

    const fs::path out_dir = prepare_out(o.common);
    write_file_atomic(out_dir / "samples.csv", points_csv(traj.terminal(), classes));
    write_file_atomic(out_dir / "samples.svg",
                      scatter_svg(o.schedule, {{o.schedule, &traj.terminal(), "#1f77b4"}}));

    RunManifest m = start_manifest(inv, "sample");
    m.set_config({{"schedule", o.schedule},
                  {"routing", to_string(experts.set.mode)},
                  {"n", o.n},
                  {"class", o.cls ? nlohmann::json(*o.cls) : nlohmann::json(nullptr)},
                  {"executed", schedule.to_json()}});
    m.seeds = {o.common.seed};
    m.add_input(o.teacher);
    for (const auto& p : experts.inputs) {
        m.add_input(p);
    }
    record(m, out_dir, "samples.csv");
    record(m, out_dir, "samples.svg");
    if (o.trajectory) {
        write_trajectory_csv(traj, out_dir / "trajectory.csv");
        record(m, out_dir, "trajectory.csv");
    }
    m.metrics = {{"nfe", traj.nfe}, {"wall_time_s", traj.wall_time_s}};
    finish_manifest(m, out_dir, inv.out);
    inv.out << fmt::format("sampled {} points with {} (nfe={})\n", o.n, o.schedule, traj.nfe);
    return kExitOk;
}

struct EvalOptions {
    SampleOptions sample;
    std::size_t seeds = 1;
    std::size_t n_reference = 4096;
    std::size_t n_proj = 64;
    std::size_t teacher_steps = 50;
    std::string id;
};

int cmd_eval(const Invocation& inv, const EvalOptions& o) {
    const SampleOptions& s = o.sample;
    const ConfigFile cfg = load_config(s.common);
    nlohmann::json header;
    const VelocityField teacher = load_teacher(s.teacher, &header);
    const Experts experts = load_experts(teacher, s.slow, s.fast, s.single);
    const PhaseSchedule schedule = build_schedule(cfg, s.schedule);

    AblationSettings settings;
    settings.data = teacher_dataset(header);
    cfg.apply(settings.data);
    settings.n_generate = cfg.get_size("n_generate", s.n);
    settings.n_reference = cfg.get_size("n_reference", o.n_reference);
    settings.n_proj = cfg.get_size("n_proj", o.n_proj);
    settings.teacher_steps = cfg.get_size("teacher_steps", o.teacher_steps);
    const std::string id = o.id.empty() ? s.schedule : o.id;

    AblationResult result;
    RunManifest m = start_manifest(inv, "eval");
    for (std::size_t k = 0; k < o.seeds; ++k) {
        const std::uint64_t seed = s.common.seed + k;
        const SeedContext ctx = make_seed_context(teacher, settings, seed);
        const Trajectory traj = generate(teacher, experts.set, schedule, ctx.noise, ctx.classes);
        MetricReport r;
        r.config_id = id;
        r.seed = seed;
        r.nfe = traj.nfe;
        r.endpoint_mse = endpoint_mse(traj.terminal(), ctx.teacher_terminal);
        r.energy_distance = energy_distance(traj.terminal(), ctx.reference);
        r.sliced_w2 = sliced_w2(traj.terminal(), ctx.reference, settings.n_proj, seed);
        r.wall_time_s = traj.wall_time_s;
        result.rows.push_back(r);
        m.seeds.push_back(seed);
    }
    const fs::path out_dir = prepare_out(s.common);
    result.write_csv(out_dir / "metrics.csv");
    inv.out << result.render_table();

    nlohmann::json echo = settings.to_json();
    echo["schedule"] = s.schedule;
    echo["routing"] = to_string(experts.set.mode);
    m.set_config(echo);
    m.add_input(s.teacher);
    for (const auto& p : experts.inputs) {
        m.add_input(p);
    }
    record(m, out_dir, "metrics.csv");
    m.metrics = {{"nfe", schedule.nfe()}};
    finish_manifest(m, out_dir, inv.out);
    return kExitOk;
}

// --- ablate ----------------------------------------------------------------

struct AblateOptions {
    Common common;
    std::string teacher;
    std::size_t seeds = 5;
    std::vector<std::string> arms = {"stage"};
    bool serial = false;
    bool figures = true;
};

AblationSettings ablation_settings(const ConfigFile& cfg, const nlohmann::json& header) {
    AblationSettings s;
    s.data = teacher_dataset(header);
    cfg.apply(s.data);
    cfg.apply(s.distill);
    cfg.apply(s.adapter);
    cfg.apply_schedule(s.grid_steps, s.partition);
    s.teacher_steps = cfg.get_size("teacher_steps", s.teacher_steps);
    s.n_generate = cfg.get_size("n_generate", s.n_generate);
    s.n_reference = cfg.get_size("n_reference", s.n_reference);
    s.n_proj = cfg.get_size("n_proj", s.n_proj);
    return s;
}

std::vector<ArmSpec> arm_group(const std::string& name) {
    if (name == "stage") {
        return stage_arms();
    }
    if (name == "data") {
        return data_scaling_arms();
    }
    if (name == "timestep") {
        return timestep_arms();
    }
    if (name == "noise") {
        return noise_control_arms();
    }
    throw ConfigError("unknown arm group '" + name + "' (expected stage, data, timestep, noise or all)");
}

int cmd_ablate(const Invocation& inv, const AblateOptions& o) {
    const ConfigFile cfg = load_config(o.common);
    nlohmann::json header;
    const VelocityField teacher = load_teacher(o.teacher, &header);
    AblationSettings settings = ablation_settings(cfg, header);
    settings.parallel = !o.serial;
    if (o.seeds == 0) {
        throw ConfigError("--seeds must be at least 1");
    }

    std::vector<ArmSpec> arms;
    for (const std::string& group : o.arms) {
        for (const std::string& g : group == "all" ? std::vector<std::string>{"stage", "data", "timestep", "noise"}
                                                   : std::vector<std::string>{group}) {
            for (ArmSpec& a : arm_group(g)) {
                const bool seen =
                    std::any_of(arms.begin(), arms.end(), [&](const ArmSpec& b) { return b.id == a.id; });
                if (!seen) {
                    arms.push_back(std::move(a));
                }
            }
        }
    }
    std::vector<std::uint64_t> seeds(o.seeds);
    std::iota(seeds.begin(), seeds.end(), o.common.seed);

    const AblationResult result = run_ablation(teacher, settings, seeds, arms);
    const fs::path out_dir = prepare_out(o.common);
    result.write_csv(out_dir / "ablation.csv");
    const std::string table = result.render_table();
    write_file_atomic(out_dir / "ablation.md", table);
    inv.out << table;

    RunManifest m = start_manifest(inv, "ablate");
    nlohmann::json echo = settings.to_json();
    echo["arms"] = nlohmann::json::array();
    for (const ArmSpec& a : arms) {
        echo["arms"].push_back(a.to_json());
    }
    m.set_config(echo);
    m.seeds = seeds;
    m.add_input(o.teacher);
    record(m, out_dir, "ablation.csv");
    record(m, out_dir, "ablation.md");
    if (o.figures) {
        result.write_figures(out_dir / "figures");
        std::vector<std::string> names;
        for (const auto& entry : fs::directory_iterator(out_dir / "figures")) {
            names.push_back((fs::path("figures") / entry.path().filename()).string());
        }
        std::sort(names.begin(), names.end());
        for (const std::string& name : names) {
            record(m, out_dir, name);
        }
    }
    m.metrics = {{"rows", result.rows.size()}, {"failures", result.failures.size()}};
    finish_manifest(m, out_dir, inv.out);
    if (!result.failures.empty()) {
        inv.err << result.failures.size() << " arm(s) failed\n";
        return kExitFailure;
    }
    return kExitOk;
}

// --- baseline-calibrate --------------------------------------------------

struct BaselineOptions {
    Common common;
    std::string teacher;
    std::size_t seeds = 5;
    std::string output = "baseline.json";
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_baseline(const Invocation& inv, const BaselineOptions& o) {
    const ConfigFile cfg = load_config(o.common);
    nlohmann::json header;
    const VelocityField teacher = load_teacher(o.teacher, &header);
    const AblationSettings settings = ablation_settings(cfg, header);
    const TimeGrid grid = TimeGrid::uniform(settings.grid_steps);
    const PhasePartition part = partition(grid, settings.partition);

    std::vector<double> teacher_ed, bare55, bare35, uniform8, teacher10, t50, t10;
    for (std::size_t k = 0; k < o.seeds; ++k) {
        const std::uint64_t seed = o.common.seed + k;
        const SeedContext ctx = make_seed_context(teacher, settings, seed);
        teacher_ed.push_back(energy_distance(ctx.teacher_terminal, ctx.reference));
        const auto mse_of = [&](const PhaseSchedule& sch) {
            return endpoint_mse(generate(teacher, ExpertSet::bare(), sch, ctx.noise, ctx.classes).terminal(),
                                ctx.teacher_terminal);
        };
        bare55.push_back(mse_of(allocate(grid, part, 5, 5)));
        bare35.push_back(mse_of(allocate(grid, part, 3, 5)));
        uniform8.push_back(mse_of(uniform_schedule(grid, part, 8)));
        teacher10.push_back(endpoint_mse(teacher_sample(teacher, 10, ctx.noise, ctx.classes).terminal(),
                                         ctx.teacher_terminal));
        auto t0 = std::chrono::steady_clock::now();
        (void)teacher_sample(teacher, 50, ctx.noise, ctx.classes);
        t50.push_back(seconds_since(t0));
        t0 = std::chrono::steady_clock::now();
        (void)generate(teacher, ExpertSet::bare(), allocate(grid, part, 5, 5), ctx.noise, ctx.classes);
        t10.push_back(seconds_since(t0));
    }
    const auto summary = [](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) {
            var += (x - mean) * (x - mean);
        }
        const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        return nlohmann::json{{"mean", mean}, {"std", sd}, {"max", *std::max_element(v.begin(), v.end())},
                              {"values", v}};
    };
    nlohmann::json baseline = {
        {"teacher_energy_distance", summary(teacher_ed)},
        {"endpoint_mse",
         {{"bare_slow5-fast5", summary(bare55)},
          {"bare_slow3-fast5", summary(bare35)},
          {"bare_uniform8", summary(uniform8)},
          {"teacher10", summary(teacher10)}}},
        {"wall_time_s", {{"nfe50", summary(t50)}, {"nfe10", summary(t10)}}},
    };
    // Acceptance bounds: a usable teacher stays within twice the calibrated worst seed.
    baseline["thresholds"] = {
        {"teacher_energy_distance_max", 2.0 * baseline["teacher_energy_distance"]["max"].get<double>()},
        {"bare_slow5-fast5_endpoint_mse_max", 2.0 * baseline["endpoint_mse"]["bare_slow5-fast5"]["max"].get<double>()},
        {"wall_time_ratio_max", 0.25},
    };
    baseline["settings"] = settings.to_json();

    const fs::path out_dir = prepare_out(o.common);
    write_file_atomic(out_dir / o.output, baseline.dump(2) + "\n");
    RunManifest m = start_manifest(inv, "baseline-calibrate");
    m.set_config(settings.to_json());
    for (std::size_t k = 0; k < o.seeds; ++k) {
        m.seeds.push_back(o.common.seed + k);
    }
    m.add_input(o.teacher);
    m.artifacts.push_back({o.output, file_sha1(out_dir / o.output)});
    m.metrics = baseline["thresholds"];
    finish_manifest(m, out_dir, inv.out);
    inv.out << baseline["thresholds"].dump(2) << "\n";
    return kExitOk;
}

// --- rerun -----------------------------------------------------------------

// Splits a CSV line on commas.
std::vector<std::string> csv_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) {
        out.push_back(f);
    }
    return out;
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Byte comparison, except that a wall_time_s column in CSV files is ignored.
bool same_artifact(const fs::path& a, const fs::path& b) {
    if (!fs::exists(a) || !fs::exists(b)) {
        return false;
    }
    const std::string ta = read_all(a);
    const std::string tb = read_all(b);
    if (ta == tb) {
        return true;
    }
    if (a.extension() != ".csv") {
        return false;
    }
    std::istringstream sa(ta), sb(tb);
    std::string la, lb;
    std::getline(sa, la);
    std::getline(sb, lb);
    if (la != lb) {
        return false;
    }
    const auto header = csv_fields(la);
    const auto skip = std::find(header.begin(), header.end(), "wall_time_s") - header.begin();
    if (static_cast<std::size_t>(skip) == header.size()) {
        return false;
    }
    while (true) {
        const bool ga = static_cast<bool>(std::getline(sa, la));
        const bool gb = static_cast<bool>(std::getline(sb, lb));
        if (ga != gb) {
            return false;
        }
        if (!ga) {
            return true;
        }
        auto fa = csv_fields(la);
        auto fb = csv_fields(lb);
        if (fa.size() != fb.size() || fa.size() != header.size()) {
            return false;
        }
        fa.erase(fa.begin() + skip);
        fb.erase(fb.begin() + skip);
        if (fa != fb) {
            return false;
        }
    }
}

int dispatch(const Invocation& inv);

int cmd_rerun(const Invocation& inv, const std::string& manifest_path, const std::string& out) {
    const RunManifest m = RunManifest::load(manifest_path);
    const fs::path original_dir = fs::path(manifest_path).parent_path();
    if (m.subcommand == "rerun") {
        throw ConfigError("cannot rerun a rerun manifest");
    }
    for (const FileRecord& input : m.inputs) {
        if (!fs::exists(input.path) || file_sha1(input.path) != input.sha1) {
            inv.err << "input changed since the original run: " << input.path << "\n";
            return kExitFailure;
        }
    }
    std::vector<std::string> args;
    for (std::size_t i = 0; i < m.argv.size(); ++i) {
        if (m.argv[i] == "--out" && i + 1 < m.argv.size()) {
            ++i;
            continue;
        }
        if (m.argv[i].rfind("--out=", 0) == 0) {
            continue;
        }
        args.push_back(m.argv[i]);
    }
    args.push_back("--out");
    args.push_back(out);
    std::ostringstream quiet;
    const int code = dispatch({args, quiet, inv.err});
    if (code != kExitOk) {
        inv.err << "rerun exited with code " << code << "\n";
        return code;
    }
    bool all_same = true;
    for (const FileRecord& artifact : m.artifacts) {
        const bool same = same_artifact(original_dir / artifact.path, fs::path(out) / artifact.path);
        inv.out << (same ? "MATCH " : "DIFF  ") << artifact.path << "\n";
        all_same = all_same && same;
    }
    const RunManifest again = RunManifest::load(fs::path(out) / (m.subcommand + ".manifest.json"));
    if (again.config_hash != m.config_hash) {
        inv.out << "DIFF  config hash\n";
        all_same = false;
    }
    inv.out << (all_same ? "rerun reproduced every artifact\n" : "rerun differs from the original\n");
    return all_same ? kExitOk : kExitFailure;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
    sub->add_option("--config", c.config, "Flat key=value or JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Seed")->capture_default_str();
}

int dispatch(const Invocation& inv) {
    CLI::App app{"Phase-aware slow/fast LoRA flow-matching lab", "slowfast"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP threads (0 keeps the default)");

    TeacherOptions teacher_opts;
    auto* train = app.add_subcommand("train-teacher", "Flow-matching pretraining of the base model");
    add_common(train, teacher_opts.common);
    train->add_option("--steps", teacher_opts.steps, "Training steps");
    train->add_option("--dataset", teacher_opts.dataset, "eight_gaussians, two_moons, checkerboard or gaussian");
    train->add_flag("--unconditional", teacher_opts.unconditional, "Train without the class table");

    DistillOptions distill_opts;
    auto* distill = app.add_subcommand("distill", "Train slow/fast LoRA experts on a frozen teacher");
    add_common(distill, distill_opts.common);
    distill->add_option("--teacher", distill_opts.teacher, "Teacher checkpoint")->required()->check(CLI::ExistingFile);
    distill->add_option("--phase", distill_opts.phase, "slow, fast, both or single")
        ->check(CLI::IsMember({"slow", "fast", "both", "single", "full"}))
        ->capture_default_str();
    distill->add_option("--samples", distill_opts.samples, "Training set size")->capture_default_str();
    distill->add_option("--steps", distill_opts.steps, "Distillation steps");

    const auto add_sample_flags = [](CLI::App* sub, SampleOptions& s) {
        add_common(sub, s.common);
        sub->add_option("--teacher", s.teacher, "Teacher checkpoint")->required()->check(CLI::ExistingFile);
        sub->add_option("--slow", s.slow, "Slow expert checkpoint")->check(CLI::ExistingFile);
        sub->add_option("--fast", s.fast, "Fast expert checkpoint")->check(CLI::ExistingFile);
        sub->add_option("--single", s.single, "Single adapter checkpoint")->check(CLI::ExistingFile);
        sub->add_option("--schedule", s.schedule, "slowK-fastM, uniformK or teacher[N]")->capture_default_str();
        sub->add_option("--n", s.n, "Number of samples")->capture_default_str();
        sub->add_option("--class", s.cls, "Class id for every sample");
    };
    SampleOptions sample_opts;
    auto* sample_cmd = app.add_subcommand("sample", "Generate points with a schedule and experts");
    add_sample_flags(sample_cmd, sample_opts);
    sample_cmd->add_flag("--trajectory", sample_opts.trajectory, "Also write every intermediate state");

    EvalOptions eval_opts;
    auto* eval = app.add_subcommand("eval", "Metrics against the 50-step teacher and the data");
    add_sample_flags(eval, eval_opts.sample);
    eval->add_option("--seeds", eval_opts.seeds, "Number of consecutive seeds")->capture_default_str();
    eval->add_option("--id", eval_opts.id, "Config id for the report");

    AblateOptions ablate_opts;
    auto* ablate = app.add_subcommand("ablate", "Run ablation arms over several seeds");
    add_common(ablate, ablate_opts.common);
    ablate->add_option("--teacher", ablate_opts.teacher, "Teacher checkpoint")->required()->check(CLI::ExistingFile);
    ablate->add_option("--seeds", ablate_opts.seeds, "Number of consecutive seeds")->capture_default_str();
    ablate->add_option("--arms", ablate_opts.arms, "stage, data, timestep, noise or all")->capture_default_str();
    ablate->add_flag("--serial", ablate_opts.serial, "Run arms one at a time");
    ablate->add_flag("!--no-figures", ablate_opts.figures, "Skip SVG figures");

    BaselineOptions baseline_opts;
    auto* baseline = app.add_subcommand("baseline-calibrate", "Measure reference thresholds for a teacher");
    add_common(baseline, baseline_opts.common);
    baseline->add_option("--teacher", baseline_opts.teacher, "Teacher checkpoint")->required()->check(CLI::ExistingFile);
    baseline->add_option("--seeds", baseline_opts.seeds, "Number of consecutive seeds")->capture_default_str();
    baseline->add_option("--output", baseline_opts.output, "File name inside --out")->capture_default_str();

    std::string rerun_manifest;
    std::string rerun_out = "rerun";
    auto* rerun = app.add_subcommand("rerun", "Execute a run manifest again and compare its artifacts");
    rerun->add_option("manifest", rerun_manifest, "Manifest file")->required()->check(CLI::ExistingFile);
    rerun->add_option("--out", rerun_out, "Output directory for the rerun")->capture_default_str();

    std::vector<std::string> reversed(inv.args.rbegin(), inv.args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, inv.out, inv.err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, inv.out, inv.err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, inv.out, inv.err);
        inv.err << app.help();
        return kExitConfig;
    }
    if (threads > 0) {
        omp_set_num_threads(threads);
    }

    if (*train) {
        return cmd_train_teacher(inv, teacher_opts, train->count("--seed") > 0);
    }
    if (*distill) {
        return cmd_distill(inv, distill_opts, distill->count("--seed") > 0);
    }
    if (*sample_cmd) {
        return cmd_sample(inv, sample_opts);
    }
    if (*eval) {
        return cmd_eval(inv, eval_opts);
    }
    if (*ablate) {
        return cmd_ablate(inv, ablate_opts);
    }
    if (*baseline) {
        return cmd_baseline(inv, baseline_opts);
    }
    return cmd_rerun(inv, rerun_manifest, rerun_out);
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const Invocation inv{args, out, err};
    try {
        return dispatch(inv);
    } catch (const NumericalError& e) {
        err << "numerical error at step " << e.step() << ": " << e.what() << "\n";
        if (e.snapshot()) {
            const fs::path path = fs::temp_directory_path() / fmt::format("slowfast_snapshot_step{}.ckpt", e.step());
            try {
                save_teacher(path, *e.snapshot(), 0);
                err << "snapshot: " << path.string() << "\n";
            } catch (const std::exception& inner) {
                err << "could not write snapshot: " << inner.what() << "\n";
            }
        }
        return kExitNumerical;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const AdapterError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ConditionError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

} // namespace slowfast
