#pragma once

#include "ogs/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace ogs {

/// How a section is filled when a container is initialized from a seed.
enum class InitKind { Uniform, Zero, One };

struct WeightSection {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;

    std::size_t count() const;
};

/// Portable bundle of named, shaped f32 arrays. On disk: a text manifest
/// (name, shape, byte offset, FNV-1a hash per section) terminated by "end",
/// then the raw little-endian payloads in manifest order. Hashes are
/// verified on load.
class WeightContainer {
public:
    void add(const std::string& name, std::vector<int> shape, std::vector<float> data);

    bool has(const std::string& name) const;
    const WeightSection& section(const std::string& name) const;  // throws on miss
    std::uint64_t section_hash(const std::string& name) const;

    /// Section as a dense double matrix; shape must be 2-D (or 1-D with
    /// cols=shape[0], rows=1 refused — use vec()).
    MatX mat(const std::string& name) const;
    VecX vec(const std::string& name) const;

    const std::vector<WeightSection>& sections() const { return sections_; }

    void save(const std::filesystem::path& path) const;
    static WeightContainer load(const std::filesystem::path& path);

private:
    std::vector<WeightSection> sections_;
    std::unordered_map<std::string, std::size_t> index_;
};

std::uint64_t fnv1a(const void* data, std::size_t bytes);

/// Seeded fill: Uniform sections draw from
/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) realized from raw mt19937_64
/// bits, so files are identical across toolchains.
std::vector<float> seeded_fill(std::uint64_t& state_seed, InitKind kind, std::size_t count,
                               int fan_in);

}  // namespace ogs
