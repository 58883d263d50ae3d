#include "koopa/config.hpp"

#include "koopa/error.hpp"
#include "koopa/text.hpp"

#include <fstream>
#include <sstream>

namespace koopa::config {

KeyValues parse_text(std::istream& in, const std::string& name) {
    KeyValues kv;
    std::string section;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = text::trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ParseError("config '" + name + "': malformed section header", line_no);
            }
            section = std::string(text::trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("config '" + name + "': expected key = value", line_no);
        }
        const std::string key(text::trim(line.substr(0, eq)));
        std::string value(text::trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw ParseError("config '" + name + "': empty key", line_no);
        }
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

KeyValues parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    return parse_text(in, path);
}

std::pair<std::string, std::string> parse_override(const std::string& arg) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + arg + "' is not of the form key=value");
    }
    return {std::string(text::trim(arg.substr(0, eq))), std::string(text::trim(arg.substr(eq + 1)))};
}

const KeyValues& default_extras() {
    static const KeyValues defaults = {
        {"data.path", ""},
        {"data.preset", "auto"},
        {"data.train_ratio", "0.7"},
        {"data.val_ratio", "0.1"},
        {"data.scale", "true"},
        {"data.synthetic", ""},
        {"data.synthetic_rows", "2000"},
        {"data.synthetic_seed", "1"},
        {"data.synthetic_noise", "0.05"},
        {"output.dir", "koopa-out"},
        {"run.threads", "1"},
        {"eval.split", "test"},
        {"eval.stride", "1"},
        {"eval.seasonality", "1"},
        {"forecast.input", ""},
        {"forecast.output", ""},
        {"adapt.horizon", "0"},
        {"adapt.mode", "all"},
        {"adapt.split", "test"},
        {"adapt.stride", "0"},
        {"adapt.max_windows", "64"},
        {"analyze.which", "both"},
        {"analyze.subsets", "20"},
        {"analyze.windows", "16"},
        {"analyze.split", "test"},
        {"bench.dims", "16,32,64,128"},
        {"bench.steps", "256"},
        {"bench.snapshots", "0"},
        {"bench.repetitions", "5"},
        {"bench.seed", "7"},
        {"bench.naive", "true"},
    };
    return defaults;
}

const std::string& RunConfig::get(const std::string& key) const {
    const auto it = extra.find(key);
    if (it == extra.end()) {
        throw ConfigError("unknown configuration key '" + key + "'");
    }
    return it->second;
}

double RunConfig::get_double(const std::string& key) const {
    return text::parse_double(get(key), key);
}

std::size_t RunConfig::get_size(const std::string& key) const {
    return text::parse_size(get(key), key);
}

bool RunConfig::get_bool(const std::string& key) const {
    return text::parse_bool(get(key), key);
}

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& part : text::split(get(key), ',')) {
        if (!text::trim(part).empty()) {
            out.push_back(text::parse_size(part, key));
        }
    }
    return out;
}

std::string RunConfig::to_text() const {
    std::map<std::string, KeyValues> sections;
    auto add = [&](const std::string& key, const std::string& value) {
        const auto dot = key.find('.');
        sections[key.substr(0, dot)][key.substr(dot + 1)] = value;
    };
    for (const auto& [k, v] : model.to_key_values()) {
        add(k, v);
    }
    for (const auto& [k, v] : extra) {
        add(k, v);
    }
    std::ostringstream os;
    bool first = true;
    for (const auto& [section, kv] : sections) {
        if (!first) {
            os << '\n';
        }
        first = false;
        os << '[' << section << "]\n";
        for (const auto& [k, v] : kv) {
            os << k << " = " << v << '\n';
        }
    }
    return os.str();
}

RunConfig resolve(const KeyValues& file_values, const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig rc;
    rc.extra = default_extras();
    auto apply = [&](const std::string& key, const std::string& value) {
        if (key.rfind("model.", 0) == 0 || key.rfind("train.", 0) == 0) {
            if (!rc.model.set(key, value)) {
                throw ConfigError("unknown configuration key '" + key + "'");
            }
            return;
        }
        const auto it = rc.extra.find(key);
        if (it == rc.extra.end()) {
            throw ConfigError("unknown configuration key '" + key + "'");
        }
        it->second = value;
    };
    for (const auto& [k, v] : file_values) {
        apply(k, v);
    }
    for (const auto& [k, v] : overrides) {
        apply(k, v);
    }
    // Typed keys are checked eagerly so that mistakes surface before any work starts.
    for (const char* key : {"data.train_ratio", "data.val_ratio", "data.synthetic_noise"}) {
        rc.get_double(key);
    }
    for (const char* key : {"data.synthetic_rows", "data.synthetic_seed", "run.threads", "eval.stride",
                            "eval.seasonality", "adapt.horizon", "adapt.stride", "adapt.max_windows",
                            "analyze.subsets", "analyze.windows", "bench.snapshots", "bench.repetitions",
                            "bench.seed"}) {
        rc.get_size(key);
    }
    for (const char* key : {"data.scale", "bench.naive"}) {
        rc.get_bool(key);
    }
    rc.get_size_list("bench.dims");
    rc.get_size_list("bench.steps");
    rc.model.validate();
    return rc;
}

} // namespace koopa::config
