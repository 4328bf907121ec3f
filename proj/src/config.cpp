#include "ogs/config.hpp"

#include "ogs/formats.hpp"

#include <sstream>
#include <stdexcept>

namespace ogs {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
    KeyValueConfig kv;
    std::istringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw IoError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw IoError("config line " + std::to_string(lineno) + ": empty key");
        kv.values_[key] = value;
    }
    return kv;
}

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
    return parse(read_text_file(path));
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw IoError("config key " + key + ": not a number: " + it->second);
    }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw IoError("config key " + key + ": not an integer: " + it->second);
    }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw IoError("config key " + key + ": not an unsigned integer: " + it->second);
    }
}

std::string KeyValueConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

NetConfig net_config_from_kv(const KeyValueConfig& kv, const NetConfig& defaults) {
    NetConfig cfg = defaults;
    cfg.d = kv.get_int("d", cfg.d);
    cfg.patch = kv.get_int("patch", cfg.patch);
    cfg.enc_blocks = kv.get_int("enc_blocks", cfg.enc_blocks);
    cfg.dec_blocks = kv.get_int("dec_blocks", cfg.dec_blocks);
    cfg.state_blocks = kv.get_int("state_blocks", cfg.state_blocks);
    cfg.heads = kv.get_int("heads", cfg.heads);
    cfg.anchors = kv.get_int("anchors", cfg.anchors);
    cfg.lang_dim = kv.get_int("lang_dim", cfg.lang_dim);
    cfg.head_channels = kv.get_int("head_channels", cfg.head_channels);
    cfg.up_channels = kv.get_int("up_channels", cfg.up_channels);
    cfg.ff_mult = kv.get_int("ff_mult", cfg.ff_mult);
    cfg.scale_base = kv.get_double("scale_base", cfg.scale_base);
    return cfg;
}

}  // namespace ogs
