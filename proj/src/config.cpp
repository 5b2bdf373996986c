#include "slowfast/config.hpp"

#include "slowfast/error.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace slowfast {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        // TrainConfig
        "lr", "beta1", "beta2", "weight_decay", "eps", "grad_clip", "steps", "batch", "w_mode", "w_value",
        "w_table", "seed",
        // adapters
        "rank", "alpha", "lora_init",
        // schedule
        "n_steps", "partition", "rho", "snr_threshold",
        // model
        "time_embed_dim", "hidden", "conditional", "freq_base",
        // data
        "dataset", "data_seed", "gaussian_mean", "gaussian_std",
        // evaluation
        "n_generate", "n_reference", "n_proj", "teacher_steps",
    };
    return keys;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    std::string out = s.substr(b, e - b + 1);
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
        out = out.substr(1, out.size() - 2);
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        out.push_back(trim(item));
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) {
            throw std::invalid_argument(v);
        }
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

std::size_t to_size(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const unsigned long long n = std::stoull(v, &used);
        if (used != v.size() || v.front() == '-') {
            throw std::invalid_argument(v);
        }
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
}

} // namespace

void ConfigFile::set(const std::string& key, const std::string& value, const std::string& origin) {
    if (known_keys().count(key) == 0) {
        throw ConfigError(origin + ": unknown config key '" + key + "'");
    }
    entries_[key] = value;
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), origin);
    }
    return cfg;
}

ConfigFile ConfigFile::from_json(const nlohmann::json& j, const std::string& origin) {
    if (!j.is_object()) {
        throw ConfigError(origin + ": config JSON must be an object");
    }
    ConfigFile cfg;
    for (const auto& [key, value] : j.items()) {
        if (value.is_string()) {
            cfg.set(key, value.get<std::string>(), origin);
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& e : value) {
                if (!joined.empty()) {
                    joined += ",";
                }
                joined += e.is_string() ? e.get<std::string>() : e.dump();
            }
            cfg.set(key, joined, origin);
        } else if (value.is_primitive()) {
            cfg.set(key, value.dump(), origin);
        } else {
            throw ConfigError(origin + ": config key '" + key + "' must be flat");
        }
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    if (path.extension() == ".json") {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(ss.str());
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        return from_json(j, path.string());
    }
    return parse_text(ss.str(), path.string());
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : to_double(key, it->second);
}

std::size_t ConfigFile::get_size(const std::string& key, std::size_t fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : to_size(key, it->second);
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return fallback;
    }
    if (it->second == "true" || it->second == "1") {
        return true;
    }
    if (it->second == "false" || it->second == "0") {
        return false;
    }
    throw ConfigError("config key '" + key + "': expected true or false");
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

void ConfigFile::apply(TrainConfig& c) const {
    c.lr = get_double("lr", c.lr);
    c.beta1 = get_double("beta1", c.beta1);
    c.beta2 = get_double("beta2", c.beta2);
    c.weight_decay = get_double("weight_decay", c.weight_decay);
    c.eps = get_double("eps", c.eps);
    c.grad_clip = get_double("grad_clip", c.grad_clip);
    c.steps = get_size("steps", c.steps);
    c.batch = get_size("batch", c.batch);
    c.seed = get_size("seed", c.seed);
    const std::string mode = get_string("w_mode", c.weighting.mode == Weighting::Mode::table ? "table" : "constant");
    if (mode == "constant") {
        c.weighting = Weighting::constant(get_double("w_value", c.weighting.value));
    } else if (mode == "table") {
        // "tau:weight,tau:weight,..."
        std::vector<std::pair<double, double>> knots;
        for (const std::string& item : split(get_string("w_table", ""), ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) {
                throw ConfigError("w_table entries must be tau:weight");
            }
            knots.emplace_back(to_double("w_table", trim(item.substr(0, colon))),
                               to_double("w_table", trim(item.substr(colon + 1))));
        }
        c.weighting = Weighting::from_table(std::move(knots));
    } else {
        throw ConfigError("w_mode must be constant or table");
    }
    c.validate();
}

void ConfigFile::apply(AdapterConfig& c) const {
    c.rank = get_size("rank", c.rank);
    c.alpha = get_double("alpha", c.alpha);
    if (has("lora_init")) {
        c.init = parse_lora_init(get_string("lora_init", ""));
    }
    if (c.rank == 0 || !(c.alpha > 0.0)) {
        throw ConfigError("rank and alpha must be positive");
    }
}

void ConfigFile::apply(ModelSpec& s) const {
    s.time_embed_dim = get_size("time_embed_dim", s.time_embed_dim);
    s.freq_base = get_double("freq_base", s.freq_base);
    if (has("hidden")) {
        s.hidden.clear();
        for (const std::string& w : split(get_string("hidden", ""), ',')) {
            s.hidden.push_back(to_size("hidden", w));
        }
    }
    try {
        s.validate();
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
}

void ConfigFile::apply(Dataset2D& d) const {
    if (has("dataset")) {
        d.kind = parse_dataset_kind(get_string("dataset", ""));
    }
    d.seed = get_size("data_seed", d.seed);
    if (has("gaussian_mean")) {
        const auto parts = split(get_string("gaussian_mean", ""), ',');
        if (parts.size() != 2) {
            throw ConfigError("gaussian_mean needs two comma-separated values");
        }
        d.mean = {to_double("gaussian_mean", parts[0]), to_double("gaussian_mean", parts[1])};
    }
    d.stddev = get_double("gaussian_std", d.stddev);
    if (!(d.stddev > 0.0)) {
        throw ConfigError("gaussian_std must be positive");
    }
}

void ConfigFile::apply_schedule(std::size_t& grid_steps, PartitionMode& mode) const {
    grid_steps = get_size("n_steps", grid_steps);
    const std::string kind =
        get_string("partition", mode.kind == PartitionMode::Kind::index_fraction ? "index_fraction" : "snr_threshold");
    if (kind == "index_fraction") {
        mode = PartitionMode::index_fraction(
            get_double("rho", mode.kind == PartitionMode::Kind::index_fraction ? mode.value : 0.4));
    } else if (kind == "snr_threshold") {
        mode = PartitionMode::snr_threshold(
            get_double("snr_threshold", mode.kind == PartitionMode::Kind::snr_threshold ? mode.value : 1.0));
    } else {
        throw ConfigError("partition must be index_fraction or snr_threshold");
    }
}

nlohmann::json to_json(const TrainConfig& c) {
    nlohmann::json j = {{"lr", c.lr},         {"beta1", c.beta1},         {"beta2", c.beta2},
                        {"weight_decay", c.weight_decay}, {"eps", c.eps}, {"grad_clip", c.grad_clip},
                        {"steps", c.steps},   {"batch", c.batch},         {"seed", c.seed}};
    if (c.weighting.mode == Weighting::Mode::constant) {
        j["w_mode"] = "constant";
        j["w_value"] = c.weighting.value;
    } else {
        j["w_mode"] = "table";
        j["w_table"] = c.weighting.table;
    }
    return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.eps = j.at("eps").get<double>();
    c.grad_clip = j.at("grad_clip").get<double>();
    c.steps = j.at("steps").get<std::size_t>();
    c.batch = j.at("batch").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.at("w_mode").get<std::string>() == "table") {
        c.weighting = Weighting::from_table(j.at("w_table").get<std::vector<std::pair<double, double>>>());
    } else {
        c.weighting = Weighting::constant(j.at("w_value").get<double>());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const AdapterConfig& c) {
    return {{"rank", c.rank}, {"alpha", c.alpha}, {"lora_init", to_string(c.init)}};
}

AdapterConfig adapter_config_from_json(const nlohmann::json& j) {
    return {j.at("rank").get<std::size_t>(), j.at("alpha").get<double>(),
            parse_lora_init(j.at("lora_init").get<std::string>())};
}

nlohmann::json to_json(const ModelSpec& s) {
    return {{"data_dim", s.data_dim},       {"time_embed_dim", s.time_embed_dim}, {"hidden", s.hidden},
            {"num_classes", s.num_classes}, {"freq_base", s.freq_base}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec s;
    s.data_dim = j.at("data_dim").get<std::size_t>();
    s.time_embed_dim = j.at("time_embed_dim").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.freq_base = j.at("freq_base").get<double>();
    s.validate();
    return s;
}

nlohmann::json to_json(const Dataset2D& d) {
    return {{"kind", to_string(d.kind)}, {"seed", d.seed}, {"mean", d.mean}, {"stddev", d.stddev}};
}

Dataset2D dataset_from_json(const nlohmann::json& j) {
    Dataset2D d;
    d.kind = parse_dataset_kind(j.at("kind").get<std::string>());
    d.seed = j.at("seed").get<std::uint64_t>();
    d.mean = j.at("mean").get<std::array<double, 2>>();
    d.stddev = j.at("stddev").get<double>();
    return d;
}

nlohmann::json to_json(const PartitionMode& m) {
    return {{"kind", m.kind == PartitionMode::Kind::index_fraction ? "index_fraction" : "snr_threshold"},
            {"value", m.value}};
}

PartitionMode partition_mode_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "index_fraction") {
        return PartitionMode::index_fraction(j.at("value").get<double>());
    }
    if (kind == "snr_threshold") {
        return PartitionMode::snr_threshold(j.at("value").get<double>());
    }
    throw ConfigError("unknown partition kind '" + kind + "'");
}

} // namespace slowfast
