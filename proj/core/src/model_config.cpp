#include "koopa/model.hpp"

#include "koopa/error.hpp"
#include "koopa/text.hpp"

namespace koopa {

std::size_t ModelConfig::lookback_segments() const noexcept {
    const std::size_t s = segment_length();
    return s == 0 ? 0 : (lookback + s - 1) / s;
}

std::size_t ModelConfig::horizon_segments() const noexcept {
    const std::size_t s = segment_length();
    return s == 0 ? 0 : (horizon + s - 1) / s;
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
    if (lookback < 2) {
        fail("lookback must be at least 2");
    }
    if (horizon < 1) {
        fail("horizon must be at least 1");
    }
    if (variates < 1) {
        fail("variates must be at least 1");
    }
    if (blocks < 1) {
        fail("blocks must be at least 1");
    }
    if (embed_dim < 2) {
        fail("embed_dim must be at least 2");
    }
    const std::size_t s = segment_length();
    if (s < 1 || s > lookback) {
        fail("segment_len must lie in [1, lookback]");
    }
    if (lookback_segments() < 2) {
        fail("lookback must span at least two segments (segment_len " + std::to_string(s) + ", lookback " +
             std::to_string(lookback) + ")");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        fail("alpha must lie in (0, 1]");
    }
    if (hidden_layers > 0 && hidden_dim < 1) {
        fail("hidden_dim must be positive");
    }
    if (!(lr > 0.0)) {
        fail("lr must be positive");
    }
    if (batch_size < 1) {
        fail("batch_size must be at least 1");
    }
    if (max_epochs < 1) {
        fail("max_epochs must be at least 1");
    }
    if (!(std_floor > 0.0)) {
        fail("std_floor must be positive");
    }
    if (!(k_inv_init_scale >= 0.0)) {
        fail("k_inv_init_scale must be non-negative");
    }
}

std::string to_string(LossSpace s) {
    return s == LossSpace::normalized ? "normalized" : "denormalized";
}

std::map<std::string, std::string> ModelConfig::to_key_values() const {
    return {
        {"model.lookback", std::to_string(lookback)},
        {"model.horizon", std::to_string(horizon)},
        {"model.variates", std::to_string(variates)},
        {"model.blocks", std::to_string(blocks)},
        {"model.segment_len", std::to_string(segment_len)},
        {"model.embed_dim", std::to_string(embed_dim)},
        {"model.alpha", text::format_double(alpha)},
        {"model.hidden_dim", std::to_string(hidden_dim)},
        {"model.hidden_layers", std::to_string(hidden_layers)},
        {"model.activation", nn::to_string(activation)},
        {"model.normalize", normalize ? "true" : "false"},
        {"model.detach_kvar", detach_kvar ? "true" : "false"},
        {"model.k_inv_init_scale", text::format_double(k_inv_init_scale)},
        {"model.std_floor", text::format_double(std_floor)},
        {"train.lr", text::format_double(lr)},
        {"train.batch_size", std::to_string(batch_size)},
        {"train.max_epochs", std::to_string(max_epochs)},
        {"train.patience", std::to_string(patience)},
        {"train.seed", std::to_string(seed)},
        {"train.loss_space", to_string(loss_space)},
    };
}

bool ModelConfig::set(const std::string& raw_key, const std::string& value) {
    std::string key = raw_key;
    for (const char* prefix : {"model.", "train."}) {
        if (key.rfind(prefix, 0) == 0) {
            key = key.substr(std::string(prefix).size());
            break;
        }
    }
    using text::parse_bool;
    using text::parse_double;
    using text::parse_size;
    if (key == "lookback") {
        lookback = parse_size(value, raw_key);
    } else if (key == "horizon") {
        horizon = parse_size(value, raw_key);
    } else if (key == "variates") {
        variates = parse_size(value, raw_key);
    } else if (key == "blocks") {
        blocks = parse_size(value, raw_key);
    } else if (key == "segment_len") {
        segment_len = parse_size(value, raw_key);
    } else if (key == "embed_dim") {
        embed_dim = parse_size(value, raw_key);
    } else if (key == "alpha") {
        alpha = parse_double(value, raw_key);
    } else if (key == "hidden_dim") {
        hidden_dim = parse_size(value, raw_key);
    } else if (key == "hidden_layers") {
        hidden_layers = parse_size(value, raw_key);
    } else if (key == "activation") {
        activation = nn::parse_activation(value);
    } else if (key == "normalize") {
        normalize = parse_bool(value, raw_key);
    } else if (key == "detach_kvar") {
        detach_kvar = parse_bool(value, raw_key);
    } else if (key == "k_inv_init_scale") {
        k_inv_init_scale = parse_double(value, raw_key);
    } else if (key == "std_floor") {
        std_floor = parse_double(value, raw_key);
    } else if (key == "lr") {
        lr = parse_double(value, raw_key);
    } else if (key == "batch_size") {
        batch_size = parse_size(value, raw_key);
    } else if (key == "max_epochs") {
        max_epochs = parse_size(value, raw_key);
    } else if (key == "patience") {
        patience = parse_size(value, raw_key);
    } else if (key == "seed") {
        seed = parse_size(value, raw_key);
    } else if (key == "loss_space") {
        if (value == "normalized") {
            loss_space = LossSpace::normalized;
        } else if (value == "denormalized") {
            loss_space = LossSpace::denormalized;
        } else {
            throw ConfigError(raw_key + ": expected normalized or denormalized, got '" + value + "'");
        }
    } else {
        return false;
    }
    return true;
}

ModelConfig ModelConfig::from_key_values(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    for (const auto& [k, v] : kv) {
        if (!c.set(k, v)) {
            throw ConfigError("unknown model configuration key '" + k + "'");
        }
    }
    return c;
}

} // namespace koopa
