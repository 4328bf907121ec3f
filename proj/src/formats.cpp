#include "ogs/formats.hpp"

#include <zlib.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ogs {

namespace {

constexpr std::array<char, 16> kSceneMagic = {'O', 'G', 'S', 'S', 'C', 'E', 'N', 'E',
                                              '-', 'V', '1', '\0', '\0', '\0', '\0', '\0'};

std::ofstream open_out(const std::filesystem::path& path, bool binary = true) {
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    return f;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = true) {
    std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    return f;
}

void put_f32(std::string& buf, double v) {
    const float f = static_cast<float>(v);
    char b[4];
    std::memcpy(b, &f, 4);
    buf.append(b, 4);
}

double take_f32(const char*& p) {
    float f;
    std::memcpy(&f, p, 4);
    p += 4;
    return static_cast<double>(f);
}

}  // namespace

void write_scene(const std::filesystem::path& path, const GaussianScene& scene) {
    std::string buf;
    buf.reserve(32 + scene.size() * (15 + scene.K) * 4);
    buf.append(kSceneMagic.data(), kSceneMagic.size());
    const std::uint32_t k32 = static_cast<std::uint32_t>(scene.K);
    const std::uint64_t n64 = scene.size();
    buf.append(reinterpret_cast<const char*>(&k32), 4);
    buf.append(reinterpret_cast<const char*>(&n64), 8);
    for (const GaussianPrimitive& g : scene.primitives) {
        for (int i = 0; i < 3; ++i) put_f32(buf, g.mu[i]);
        for (int i = 0; i < 4; ++i) put_f32(buf, g.rot[i]);
        for (int i = 0; i < 3; ++i) put_f32(buf, g.scale[i]);
        put_f32(buf, g.opacity);
        for (int i = 0; i < 3; ++i) put_f32(buf, g.color[i]);
        for (int i = 0; i < scene.K; ++i) put_f32(buf, g.lang[i]);
        put_f32(buf, g.confidence);
    }
    open_out(path).write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

GaussianScene read_scene(const std::filesystem::path& path, double voxel_size) {
    auto f = open_in(path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 28 || std::memcmp(buf.data(), kSceneMagic.data(), 16) != 0) {
        throw IoError("not an OGS v1 scene file: " + path.string());
    }
    std::uint32_t k32;
    std::uint64_t n64;
    std::memcpy(&k32, buf.data() + 16, 4);
    std::memcpy(&n64, buf.data() + 20, 8);
    const int K = static_cast<int>(k32);
    const std::size_t stride = (15 + static_cast<std::size_t>(K)) * 4;
    if (buf.size() != 28 + n64 * stride) {
        throw IoError("truncated OGS scene file: " + path.string());
    }
    GaussianScene scene(K, voxel_size);
    scene.primitives.reserve(n64);
    const char* p = buf.data() + 28;
    for (std::uint64_t i = 0; i < n64; ++i) {
        GaussianPrimitive g;
        g.lang = VecX(K);
        for (int j = 0; j < 3; ++j) g.mu[j] = take_f32(p);
        for (int j = 0; j < 4; ++j) g.rot[j] = take_f32(p);
        for (int j = 0; j < 3; ++j) g.scale[j] = take_f32(p);
        g.opacity = take_f32(p);
        for (int j = 0; j < 3; ++j) g.color[j] = take_f32(p);
        for (int j = 0; j < K; ++j) g.lang[j] = take_f32(p);
        g.confidence = take_f32(p);
        scene.primitives.push_back(std::move(g));
    }
    scene.rebuild_index();
    return scene;
}

namespace {

unsigned char quantize(double v) {
    const double c = std::clamp(v, 0.0, 1.0) * 255.0;
    return static_cast<unsigned char>(std::lround(c));
}

Image read_pnm(const std::filesystem::path& path, const char* magic, int channels) {
    auto f = open_in(path);
    std::string tag;
    int w = 0, h = 0, maxval = 0;
    f >> tag >> w >> h >> maxval;
    if (tag != magic || w <= 0 || h <= 0 || maxval != 255) {
        throw IoError(std::string("bad ") + magic + " header: " + path.string());
    }
    f.get();  // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw IoError("truncated image payload: " + path.string());
    }
    Image img(h, w, channels);
    for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
    return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img, const char* magic,
               int channels) {
    if (img.channels != channels) {
        throw std::invalid_argument(std::string("image must have ") + std::to_string(channels) +
                                    " channels for " + magic);
    }
    std::ostringstream head;
    head << magic << "\n" << img.width << " " << img.height << "\n255\n";
    std::string buf = head.str();
    buf.reserve(buf.size() + img.data.size());
    for (double v : img.data) buf.push_back(static_cast<char>(quantize(v)));
    open_out(path).write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& rgb) { write_pnm(path, rgb, "P6", 3); }
Image read_ppm(const std::filesystem::path& path) { return read_pnm(path, "P6", 3); }
void write_pgm(const std::filesystem::path& path, const Image& gray) { write_pnm(path, gray, "P5", 1); }
Image read_pgm(const std::filesystem::path& path) { return read_pnm(path, "P5", 1); }

namespace {

void png_chunk(std::string& out, const char type[4], const std::string& payload) {
    const std::uint32_t len = static_cast<std::uint32_t>(payload.size());
    const unsigned char lb[4] = {static_cast<unsigned char>(len >> 24),
                                 static_cast<unsigned char>(len >> 16),
                                 static_cast<unsigned char>(len >> 8),
                                 static_cast<unsigned char>(len)};
    out.append(reinterpret_cast<const char*>(lb), 4);
    const std::size_t start = out.size();
    out.append(type, 4);
    out += payload;
    const auto crc = crc32(0, reinterpret_cast<const Bytef*>(out.data() + start),
                           static_cast<uInt>(out.size() - start));
    const unsigned char cb[4] = {static_cast<unsigned char>(crc >> 24),
                                 static_cast<unsigned char>(crc >> 16),
                                 static_cast<unsigned char>(crc >> 8),
                                 static_cast<unsigned char>(crc)};
    out.append(reinterpret_cast<const char*>(cb), 4);
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw std::invalid_argument("write_png: only 1- or 3-channel images");
    }
    // Filter byte 0 per row, then one zlib stream.
    std::string scan;
    scan.reserve(static_cast<std::size_t>(img.height) * (1 + img.width * img.channels));
    for (int y = 0; y < img.height; ++y) {
        scan.push_back('\0');
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                scan.push_back(static_cast<char>(quantize(img.at(y, x, c))));
    }
    uLongf comp_size = compressBound(static_cast<uLong>(scan.size()));
    std::string comp(comp_size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(comp.data()), &comp_size,
                  reinterpret_cast<const Bytef*>(scan.data()), static_cast<uLong>(scan.size()),
                  9) != Z_OK) {
        throw IoError("write_png: deflate failed");
    }
    comp.resize(comp_size);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr(13, '\0');
    auto be32 = [](std::string& s, std::size_t off, std::uint32_t v) {
        s[off] = static_cast<char>(v >> 24);
        s[off + 1] = static_cast<char>(v >> 16);
        s[off + 2] = static_cast<char>(v >> 8);
        s[off + 3] = static_cast<char>(v);
    };
    be32(ihdr, 0, static_cast<std::uint32_t>(img.width));
    be32(ihdr, 4, static_cast<std::uint32_t>(img.height));
    ihdr[8] = 8;                                   // bit depth
    ihdr[9] = img.channels == 3 ? 2 : 0;           // color type
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", comp);
    png_chunk(out, "IEND", "");
    open_out(path).write(out.data(), static_cast<std::streamsize>(out.size()));
}

void write_feature_planes(const std::filesystem::path& path, const Image& feature) {
    std::ostringstream head;
    head << "OGSF1 " << feature.height << " " << feature.width << " " << feature.channels << "\n";
    std::string buf = head.str();
    buf.reserve(buf.size() + feature.data.size() * 4);
    for (double v : feature.data) put_f32(buf, v);
    open_out(path).write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

Image read_feature_planes(const std::filesystem::path& path) {
    auto f = open_in(path);
    std::string tag;
    int h = 0, w = 0, k = 0;
    f >> tag >> h >> w >> k;
    if (tag != "OGSF1" || h <= 0 || w <= 0 || k <= 0) {
        throw IoError("bad feature-plane header: " + path.string());
    }
    f.get();
    Image img(h, w, k);
    std::vector<char> raw(img.data.size() * 4);
    f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw IoError("truncated feature planes: " + path.string());
    }
    const char* p = raw.data();
    for (double& v : img.data) v = take_f32(p);
    return img;
}

std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

void write_tum(const std::filesystem::path& path, const Trajectory& traj) {
    std::string out;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const Vec4& q = traj.quats[i];  // (w,x,y,z)
        out += std::to_string(traj.indices[i]);
        for (int j = 0; j < 3; ++j) out += " " + format_double(traj.poses[i].translation[j]);
        out += " " + format_double(q[1]) + " " + format_double(q[2]) + " " +
               format_double(q[3]) + " " + format_double(q[0]);
        out += "\n";
    }
    open_out(path, false) << out;
}

Trajectory read_tum(const std::filesystem::path& path) {
    auto f = open_in(path, false);
    Trajectory traj;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        int idx;
        double tx, ty, tz, qx, qy, qz, qw;
        if (!(ss >> idx >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad TUM line");
        }
        traj.push_back(idx, Vec4(qw, qx, qy, qz), Vec3(tx, ty, tz));
    }
    return traj;
}

std::string read_text_file(const std::filesystem::path& path) {
    auto f = open_in(path);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    open_out(path).write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace ogs
