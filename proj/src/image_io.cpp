#include "convlat/image_io.hpp"

#include <cstdio>
#include <fstream>

namespace convlat {

void write_image(const SliceImage &img, const std::filesystem::path &path, ImageFormat format)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    const int w = img.width, h = img.height;
    out << (format == ImageFormat::Pgm ? "P5\n" : "P4\n") << w << ' ' << h << '\n';
    if (format == ImageFormat::Pgm) out << "255\n";

    const std::size_t row_bytes = format == ImageFormat::Pgm ? std::size_t(w) : (std::size_t(w) + 7) / 8;
    std::vector<char> row(row_bytes);
    for (int j = h - 1; j >= 0; --j) {
        std::fill(row.begin(), row.end(), 0);
        for (int i = 0; i < w; ++i) {
            if (!img.at(i, j)) continue;
            if (format == ImageFormat::Pgm) row[std::size_t(i)] = char(255);
            else row[std::size_t(i) / 8] = char(row[std::size_t(i) / 8] | (0x80 >> (i % 8)));
        }
        out.write(row.data(), std::streamsize(row.size()));
    }
    if (!out.flush()) throw Error("I/O failure writing " + path.string());
}

namespace {

int read_header_int(std::istream &in, const std::filesystem::path &path)
{
    int c = in.peek();
    while (c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '#') {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
        } else {
            in.get();
        }
        c = in.peek();
    }
    int v = -1;
    in >> v;
    if (!in || v < 0) throw ParseError(path.string(), "offset " + std::to_string(in.tellg()), "bad image header");
    return v;
}

} // namespace

SliceImage read_image(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[2] = {};
    in.read(magic, 2);
    const bool pgm = magic[0] == 'P' && magic[1] == '5';
    const bool pbm = magic[0] == 'P' && magic[1] == '4';
    if (!pgm && !pbm) throw ParseError(path.string(), "offset 0", "not a binary PGM/PBM file");

    SliceImage img;
    img.width = read_header_int(in, path);
    img.height = read_header_int(in, path);
    if (pgm && read_header_int(in, path) != 255) throw ParseError(path.string(), "header", "max value must be 255");
    in.get();
    img.pixels.assign(std::size_t(img.width) * img.height, 0);
    const std::size_t row_bytes = pgm ? std::size_t(img.width) : (std::size_t(img.width) + 7) / 8;
    std::vector<unsigned char> row(row_bytes);
    for (int j = img.height - 1; j >= 0; --j) {
        if (!in.read(reinterpret_cast<char *>(row.data()), std::streamsize(row_bytes)))
            throw ParseError(path.string(), "offset " + std::to_string(in.tellg()), "truncated pixel data");
        for (int i = 0; i < img.width; ++i) {
            const bool on = pgm ? row[std::size_t(i)] != 0 : (row[std::size_t(i) / 8] >> (7 - i % 8)) & 1;
            img.pixels[std::size_t(j) * img.width + i] = on;
        }
    }
    return img;
}

std::string layer_file_name(std::size_t layer, const char *extension)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "layer_%05zu.%s", layer, extension);
    return buf;
}

namespace {

std::ofstream open_csv(const std::filesystem::path &path)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(10);
    return out;
}

void finish(std::ofstream &out, const std::filesystem::path &path)
{
    if (!out.flush()) throw Error("I/O failure writing " + path.string());
}

} // namespace

void write_summary_csv(const SliceSummary &sum, const std::filesystem::path &path)
{
    auto out = open_csv(path);
    out << "struts,layers,max_active,peak_resident,peak_bytes,resolution,layer_thickness,pixel_size\n";
    out << sum.struts << ',' << sum.layers << ',' << sum.max_active << ',' << sum.peak_resident << ','
        << sum.peak_bytes << ',' << sum.width << 'x' << sum.height << ',' << sum.layer_thickness << ','
        << sum.pixel_size << '\n';
    finish(out, path);
}

void write_layers_csv(const SliceSummary &sum, const std::filesystem::path &path)
{
    auto out = open_csv(path);
    out << "layer,z,active_edges,filled_pixels\n";
    for (const LayerStats &l : sum.per_layer) out << l.layer << ',' << l.z << ',' << l.active << ',' << l.filled << '\n';
    finish(out, path);
}

void write_timing_csv(const SliceSummary &sum, const std::filesystem::path &path)
{
    auto out = open_csv(path);
    out << "layer,seconds\n";
    for (const LayerStats &l : sum.per_layer) out << l.layer << ',' << l.seconds << '\n';
    out << "total," << sum.seconds << '\n';
    out << "per_layer," << (sum.layers ? sum.seconds / double(sum.layers) : 0.) << '\n';
    finish(out, path);
}

} // namespace convlat
