#include "touchlab/depth_frame.hpp"

#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

namespace touchlab {

namespace {

void write_pgm_header(std::ostream& out, int w, int h, int maxval) {
    out << "P5\n" << w << ' ' << h << '\n' << maxval << '\n';
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
int read_header_int(std::istream& in) {
    std::string tok;
    while (in) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    in >> tok;
    if (tok.empty()) throw Error(ErrorCode::IoError, "truncated PGM header");
    return std::stoi(tok);
}

struct PgmHeader {
    int width;
    int height;
    int maxval;
};

PgmHeader read_header(std::istream& in, const std::filesystem::path& path) {
    char magic[2] = {};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5')
        throw Error(ErrorCode::IoError, path.string() + ": not a binary PGM");
    PgmHeader h{};
    h.width = read_header_int(in);
    h.height = read_header_int(in);
    h.maxval = read_header_int(in);
    in.get();  // single whitespace before raster
    if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
        throw Error(ErrorCode::IoError, path.string() + ": bad PGM header");
    return h;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    return in;
}

}  // namespace

void write_pgm16(const std::filesystem::path& path, const Image<std::uint16_t>& img) {
    auto out = open_out(path);
    write_pgm_header(out, img.width(), img.height(), 65535);
    std::vector<char> raster(img.size() * 2);
    for (std::size_t i = 0; i < img.size(); ++i) {
        raster[2 * i] = static_cast<char>(img[i] >> 8);
        raster[2 * i + 1] = static_cast<char>(img[i] & 0xff);
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Image<std::uint16_t> read_pgm16(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto h = read_header(in, path);
    Image<std::uint16_t> img(h.width, h.height);
    if (h.maxval < 256) {
        std::vector<unsigned char> raster(img.size());
        in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
        if (!in) throw Error(ErrorCode::IoError, path.string() + ": truncated raster");
        for (std::size_t i = 0; i < img.size(); ++i) img[i] = raster[i];
        return img;
    }
    std::vector<unsigned char> raster(img.size() * 2);
    in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (!in) throw Error(ErrorCode::IoError, path.string() + ": truncated raster");
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = static_cast<std::uint16_t>((raster[2 * i] << 8) | raster[2 * i + 1]);
    return img;
}

void write_pgm8(const std::filesystem::path& path, const Mask& img) {
    auto out = open_out(path);
    write_pgm_header(out, img.width(), img.height(), 255);
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Mask read_pgm8(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto h = read_header(in, path);
    if (h.maxval > 255) throw Error(ErrorCode::IoError, path.string() + ": expected 8-bit PGM");
    Mask img(h.width, h.height);
    in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(img.size()));
    if (!in) throw Error(ErrorCode::IoError, path.string() + ": truncated raster");
    return img;
}

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path) {
    auto p = pgm_path;
    p.replace_extension(".json");
    return p;
}

void save_frame(const std::filesystem::path& pgm_path, const DepthFrame& frame) {
    write_pgm16(pgm_path, frame.depth);
    nlohmann::json meta = {
        {"frame_id", frame.frame_id},
        {"timestamp", frame.timestamp_ms},
        {"mm_per_px", frame.mm_per_px},
    };
    auto out = open_out(sidecar_path(pgm_path));
    out << meta.dump(2) << '\n';
}

DepthFrame load_frame(const std::filesystem::path& pgm_path) {
    DepthFrame frame;
    frame.depth = read_pgm16(pgm_path);
    const auto meta_path = sidecar_path(pgm_path);
    if (std::filesystem::exists(meta_path)) {
        auto in = open_in(meta_path);
        nlohmann::json meta;
        try {
            in >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::IoError, meta_path.string() + ": " + e.what());
        }
        frame.frame_id = meta.value("frame_id", std::uint64_t{0});
        frame.timestamp_ms = meta.value("timestamp", std::int64_t{0});
        frame.mm_per_px = meta.value("mm_per_px", 1.5);
    }
    return frame;
}

}  // namespace touchlab
