#include "nasf/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nasf/errors.hpp"

namespace nasf {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& section, const std::string& name,
                         const std::set<std::string>& known) {
    for (const auto& [key, value] : section.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown config key \"" + key + "\"" +
                              (name.empty() ? "" : " in section " + name));
        }
    }
}

template <typename T>
T get_or(const json& section, const std::string& key, T fallback) {
    if (!section.contains(key)) {
        return fallback;
    }
    try {
        return section.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key \"" + key + "\" has the wrong type");
    }
}

} // namespace

std::string RunConfig::to_json() const {
    json doc;
    doc["mode"] = run_mode_name(ga.mode);
    doc["ga"] = {{"population_size", ga.population_size},
                 {"generations", ga.generations},
                 {"crossover_rate", ga.crossover_rate},
                 {"mutation_rate", ga.mutation_rate},
                 {"tournament_size", ga.tournament_size},
                 {"elitism", ga.elitism},
                 {"seed", ga.seed}};
    doc["eval"] = {{"epochs", eval.epochs},
                   {"batch_size", eval.batch_size},
                   {"learning_rate", eval.learning_rate},
                   {"train_subset", eval.train_subset},
                   {"test_subset", eval.test_subset},
                   {"seed", eval.seed}};
    doc["data"] = {{"source", data.source},
                   {"data_dir", data.data_dir},
                   {"classes", data.classes},
                   {"image_shape", data.image_shape},
                   {"n_train", data.n_train},
                   {"n_test", data.n_test},
                   {"seed", data.seed}};
    doc["comms"] = {{"world_size", comms.world_size},
                    {"listen", comms.listen},
                    {"timeout_secs", comms.timeout_secs}};
    return doc.dump();
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    reject_unknown_keys(doc, "", {"mode", "ga", "eval", "data", "comms"});

    RunConfig cfg;
    if (doc.contains("mode")) {
        cfg.ga.mode = run_mode_from_name(doc.at("mode").get<std::string>());
    }

    if (doc.contains("ga")) {
        const json& ga = doc.at("ga");
        reject_unknown_keys(ga, "ga",
                            {"population_size", "generations", "crossover_rate",
                             "mutation_rate", "tournament_size", "elitism",
                             "seed"});
        cfg.ga.population_size = get_or(ga, "population_size", cfg.ga.population_size);
        cfg.ga.generations = get_or(ga, "generations", cfg.ga.generations);
        cfg.ga.crossover_rate = get_or(ga, "crossover_rate", cfg.ga.crossover_rate);
        cfg.ga.mutation_rate = get_or(ga, "mutation_rate", cfg.ga.mutation_rate);
        cfg.ga.tournament_size = get_or(ga, "tournament_size", cfg.ga.tournament_size);
        cfg.ga.elitism = get_or(ga, "elitism", cfg.ga.elitism);
        cfg.ga.seed = get_or(ga, "seed", cfg.ga.seed);
    }

    if (doc.contains("eval")) {
        const json& eval = doc.at("eval");
        reject_unknown_keys(eval, "eval",
                            {"epochs", "batch_size", "learning_rate",
                             "train_subset", "test_subset", "seed"});
        cfg.eval.epochs = get_or(eval, "epochs", cfg.eval.epochs);
        cfg.eval.batch_size = get_or(eval, "batch_size", cfg.eval.batch_size);
        cfg.eval.learning_rate = get_or(eval, "learning_rate", cfg.eval.learning_rate);
        cfg.eval.train_subset = get_or(eval, "train_subset", cfg.eval.train_subset);
        cfg.eval.test_subset = get_or(eval, "test_subset", cfg.eval.test_subset);
        cfg.eval.seed = get_or(eval, "seed", cfg.eval.seed);
    }

    if (doc.contains("data")) {
        const json& data = doc.at("data");
        reject_unknown_keys(data, "data",
                            {"source", "data_dir", "classes", "image_shape",
                             "n_train", "n_test", "seed"});
        cfg.data.source = get_or(data, "source", cfg.data.source);
        cfg.data.data_dir = get_or(data, "data_dir", cfg.data.data_dir);
        cfg.data.classes = get_or(data, "classes", cfg.data.classes);
        cfg.data.image_shape = get_or(data, "image_shape", cfg.data.image_shape);
        cfg.data.n_train = get_or(data, "n_train", cfg.data.n_train);
        cfg.data.n_test = get_or(data, "n_test", cfg.data.n_test);
        cfg.data.seed = get_or(data, "seed", cfg.data.seed);
    }

    if (doc.contains("comms")) {
        const json& comms = doc.at("comms");
        reject_unknown_keys(comms, "comms",
                            {"world_size", "listen", "timeout_secs"});
        cfg.comms.world_size = get_or(comms, "world_size", cfg.comms.world_size);
        cfg.comms.listen = get_or(comms, "listen", cfg.comms.listen);
        cfg.comms.timeout_secs = get_or(comms, "timeout_secs", cfg.comms.timeout_secs);
    }

    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file \"" + path + "\"");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

void RunConfig::validate() const {
    ga.validate();
    if (eval.epochs < 1) {
        throw ConfigError("eval.epochs must be >= 1");
    }
    if (eval.batch_size < 1) {
        throw ConfigError("eval.batch_size must be >= 1");
    }
    if (eval.learning_rate <= 0) {
        throw ConfigError("eval.learning_rate must be > 0");
    }
    if (eval.train_subset < 0 || eval.test_subset < 0) {
        throw ConfigError("eval subsets must be >= 0 (0 keeps everything)");
    }
    if (data.source != "synthetic" && data.source != "cifar10") {
        throw ConfigError("data.source must be synthetic or cifar10, got \"" +
                          data.source + "\"");
    }
    if (data.source == "synthetic") {
        if (data.classes < 2) {
            throw ConfigError("data.classes must be >= 2");
        }
        if (data.image_shape.size() != 3) {
            throw ConfigError("data.image_shape must be [C,H,W]");
        }
        if (data.n_train < 1 || data.n_test < 1) {
            throw ConfigError("data.n_train and data.n_test must be >= 1");
        }
    } else if (data.data_dir.empty()) {
        throw ConfigError("data.data_dir is required for cifar10");
    }
    if (comms.world_size < 1) {
        throw ConfigError("comms.world_size must be >= 1");
    }
    if (comms.timeout_secs <= 0) {
        throw ConfigError("comms.timeout_secs must be > 0");
    }
    if (ga.mode == RunMode::DistributedPopulation && comms.world_size < 2) {
        throw ConfigError("dist-pop needs comms.world_size >= 2");
    }
}

std::pair<Dataset, Dataset> RunConfig::load_data() const {
    if (data.source == "cifar10") {
        return load_cifar10(data.data_dir);
    }
    return synthetic_dataset(data.seed, data.n_train, data.n_test, data.classes,
                             data.image_shape);
}

} // namespace nasf
