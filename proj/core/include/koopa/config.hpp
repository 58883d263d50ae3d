#pragma once

#include "koopa/model.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace koopa::config {

using KeyValues = std::map<std::string, std::string>;

/// Parses INI-like text: "[section]" headers, "key = value" lines, '#' or
/// ';' comments. Keys are returned as "section.key". Throws ParseError.
KeyValues parse_text(std::istream& in, const std::string& name);
KeyValues parse_file(const std::string& path);

/// Parses a "key=value" override; throws ConfigError when '=' is missing.
std::pair<std::string, std::string> parse_override(const std::string& arg);

/// Fully resolved run configuration: the model/training settings plus
/// every other section with defaults filled in.
struct RunConfig {
    ModelConfig model;
    KeyValues extra; // non-model keys, always holding every known key

    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::size_t> get_size_list(const std::string& key) const;

    /// Canonical text in the parse_text format, sorted by section and key.
    std::string to_text() const;
};

/// Defaults for every non-model key.
const KeyValues& default_extras();

/// Applies file values then overrides (overrides win). Unknown keys and
/// invalid values raise ConfigError; the model section is validated.
RunConfig resolve(const KeyValues& file_values, const std::vector<std::pair<std::string, std::string>>& overrides);

} // namespace koopa::config
