#pragma once

#include "ogs/net.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace ogs {

/// Plain-text "key = value" configuration ('#' starts a comment). Unknown
/// keys are preserved; typed getters fall back to defaults.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text);
    static KeyValueConfig from_file(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.contains(key); }
    std::string get(const std::string& key, const std::string& fallback = "") const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    std::string serialize() const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Architecture and stream knobs from a config (keys: d, patch, enc_blocks,
/// dec_blocks, state_blocks, heads, anchors, lang_dim, head_channels,
/// up_channels, ff_mult, scale_base).
NetConfig net_config_from_kv(const KeyValueConfig& kv, const NetConfig& defaults = {});

}  // namespace ogs
