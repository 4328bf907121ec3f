#include "ogs/weights.hpp"

#include "ogs/formats.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

namespace ogs {

std::size_t WeightSection::count() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::uint64_t fnv1a(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

void WeightContainer::add(const std::string& name, std::vector<int> shape,
                          std::vector<float> data) {
    if (index_.contains(name)) throw std::invalid_argument("WeightContainer: duplicate section " + name);
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("WeightContainer: bad shape for " + name);
        n *= static_cast<std::size_t>(d);
    }
    if (n != data.size()) throw std::invalid_argument("WeightContainer: data/shape mismatch for " + name);
    index_[name] = sections_.size();
    sections_.push_back({name, std::move(shape), std::move(data)});
}

bool WeightContainer::has(const std::string& name) const { return index_.contains(name); }

const WeightSection& WeightContainer::section(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("WeightContainer: missing section " + name);
    return sections_[it->second];
}

std::uint64_t WeightContainer::section_hash(const std::string& name) const {
    const auto& s = section(name);
    return fnv1a(s.data.data(), s.data.size() * sizeof(float));
}

MatX WeightContainer::mat(const std::string& name) const {
    const auto& s = section(name);
    if (s.shape.size() != 2) throw std::invalid_argument("WeightContainer: " + name + " is not 2-D");
    MatX m(s.shape[0], s.shape[1]);
    for (int r = 0; r < s.shape[0]; ++r)
        for (int c = 0; c < s.shape[1]; ++c)
            m(r, c) = s.data[static_cast<std::size_t>(r) * s.shape[1] + c];
    return m;
}

VecX WeightContainer::vec(const std::string& name) const {
    const auto& s = section(name);
    if (s.shape.size() != 1) throw std::invalid_argument("WeightContainer: " + name + " is not 1-D");
    VecX v(s.shape[0]);
    for (int i = 0; i < s.shape[0]; ++i) v[i] = s.data[i];
    return v;
}

void WeightContainer::save(const std::filesystem::path& path) const {
    std::ostringstream manifest;
    manifest << "OGSW1\n";
    std::size_t offset = 0;
    for (const auto& s : sections_) {
        manifest << "section " << s.name << " " << s.shape.size();
        for (int d : s.shape) manifest << " " << d;
        char hex[17];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a(s.data.data(), s.data.size() * 4)));
        manifest << " " << offset << " " << hex << "\n";
        offset += s.data.size() * 4;
    }
    manifest << "end\n";

    std::string out = manifest.str();
    out.reserve(out.size() + offset);
    for (const auto& s : sections_) {
        const char* raw = reinterpret_cast<const char*>(s.data.data());
        out.append(raw, s.data.size() * 4);
    }
    write_text_file(path, out);
}

WeightContainer WeightContainer::load(const std::filesystem::path& path) {
    const std::string blob = read_text_file(path);
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const std::size_t nl = blob.find('\n', pos);
        if (nl == std::string::npos) throw IoError("weight container: unterminated manifest: " + path.string());
        std::string line = blob.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };

    if (next_line() != "OGSW1") throw IoError("not an OGSW1 weight container: " + path.string());

    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::size_t offset;
        std::uint64_t hash;
    };
    std::vector<Entry> entries;
    for (;;) {
        const std::string line = next_line();
        if (line == "end") break;
        std::istringstream ss(line);
        std::string tag;
        Entry e;
        int ndim = 0;
        ss >> tag >> e.name >> ndim;
        if (tag != "section" || ndim <= 0) throw IoError("weight container: bad manifest line: " + line);
        e.shape.resize(ndim);
        for (int i = 0; i < ndim; ++i) ss >> e.shape[i];
        std::string hex;
        ss >> e.offset >> hex;
        if (!ss || hex.size() != 16) throw IoError("weight container: bad manifest line: " + line);
        e.hash = std::stoull(hex, nullptr, 16);
        entries.push_back(std::move(e));
    }

    const char* payload = blob.data() + pos;
    const std::size_t payload_size = blob.size() - pos;
    WeightContainer wc;
    for (auto& e : entries) {
        std::size_t n = 1;
        for (int d : e.shape) n *= static_cast<std::size_t>(d);
        if (e.offset + n * 4 > payload_size) {
            throw IoError("weight container: truncated payload for section " + e.name);
        }
        std::vector<float> data(n);
        std::memcpy(data.data(), payload + e.offset, n * 4);
        if (fnv1a(data.data(), n * 4) != e.hash) {
            throw IoError("weight container: hash mismatch for section " + e.name);
        }
        wc.add(e.name, std::move(e.shape), std::move(data));
    }
    return wc;
}

std::vector<float> seeded_fill(std::uint64_t& state_seed, InitKind kind, std::size_t count,
                               int fan_in) {
    std::vector<float> out(count);
    switch (kind) {
        case InitKind::Zero:
            return out;
        case InitKind::One:
            std::fill(out.begin(), out.end(), 1.0f);
            return out;
        case InitKind::Uniform: {
            std::mt19937_64 rng(state_seed);
            state_seed = rng();  // decorrelate the next section
            const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
            for (auto& v : out) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
                v = static_cast<float>((2.0 * u - 1.0) * bound);
            }
            return out;
        }
    }
    return out;
}

}  // namespace ogs
