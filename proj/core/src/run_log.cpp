#include "nasf/run_log.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nasf/errors.hpp"

namespace nasf {

using nlohmann::json;

void RunLog::write_jsonl(std::ostream& out) const {
    json head;
    head["type"] = "header";
    head["mode"] = header.mode;
    head["world_size"] = header.world_size;
    head["started_at"] = header.started_at;
    head["config"] = json::parse(header.config_json);
    out << head.dump() << "\n";

    // interleave records the way the run produced them: evaluations of a
    // generation, then that generation's wall-time line
    std::size_t eval_cursor = 0;
    for (const auto& gen : generations) {
        while (eval_cursor < evals.size() &&
               evals[eval_cursor].generation == gen.generation) {
            const EvalRecord& r = evals[eval_cursor];
            json line;
            line["type"] = "eval";
            line["generation"] = r.generation;
            line["index"] = r.index;
            line["chromosome"] = r.chromosome;
            line["accuracy"] = r.accuracy;
            line["parameters"] = r.parameters;
            line["train_seconds"] = r.train_seconds;
            line["status"] = r.status;
            out << line.dump() << "\n";
            ++eval_cursor;
        }
        json line;
        line["type"] = "generation";
        line["generation"] = gen.generation;
        line["wall_seconds"] = gen.wall_seconds;
        out << line.dump() << "\n";
    }
    // stray evaluations without a closing generation line (aborted runs)
    for (; eval_cursor < evals.size(); ++eval_cursor) {
        const EvalRecord& r = evals[eval_cursor];
        json line;
        line["type"] = "eval";
        line["generation"] = r.generation;
        line["index"] = r.index;
        line["chromosome"] = r.chromosome;
        line["accuracy"] = r.accuracy;
        line["parameters"] = r.parameters;
        line["train_seconds"] = r.train_seconds;
        line["status"] = r.status;
        out << line.dump() << "\n";
    }
}

void RunLog::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write run log \"" + path + "\"");
    }
    write_jsonl(out);
}

RunLog RunLog::parse_jsonl(std::istream& in) {
    RunLog log;
    std::string line;
    bool saw_header = false;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json doc;
        try {
            doc = json::parse(line);
            const std::string type = doc.at("type").get<std::string>();
            if (type == "header") {
                log.header.mode = doc.at("mode").get<std::string>();
                log.header.world_size = doc.at("world_size").get<int>();
                log.header.started_at = doc.at("started_at").get<std::string>();
                log.header.config_json = doc.at("config").dump();
                saw_header = true;
            } else if (type == "eval") {
                EvalRecord r;
                r.generation = doc.at("generation").get<int>();
                r.index = doc.at("index").get<int>();
                const auto genes = doc.at("chromosome");
                for (int i = 0; i < 4; ++i) {
                    r.chromosome[i] = genes.at(i).get<int>();
                }
                r.accuracy = doc.at("accuracy").get<double>();
                r.parameters = doc.at("parameters").get<std::int64_t>();
                r.train_seconds = doc.at("train_seconds").get<double>();
                r.status = doc.at("status").get<std::string>();
                log.evals.push_back(std::move(r));
            } else if (type == "generation") {
                GenerationRecord g;
                g.generation = doc.at("generation").get<int>();
                g.wall_seconds = doc.at("wall_seconds").get<double>();
                log.generations.push_back(g);
            } else {
                throw ConfigError("unknown record type \"" + type + "\"");
            }
        } catch (const json::exception& e) {
            throw ConfigError("run log line " + std::to_string(line_no) +
                              ": " + e.what());
        }
    }
    if (!saw_header) {
        throw ConfigError("run log has no header line");
    }
    return log;
}

RunLog RunLog::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read run log \"" + path + "\"");
    }
    return parse_jsonl(in);
}

std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

} // namespace nasf
