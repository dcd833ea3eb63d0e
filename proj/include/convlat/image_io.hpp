#pragma once

#include "convlat/slicer.hpp"

#include <filesystem>
#include <string>

namespace convlat {

enum class ImageFormat { Pgm, Pbm };

// Binary PGM (P5, 255 = inside) or PBM (P4, 1 bit = inside). The first
// written row is the highest y so the file reads like a top view.
void write_image(const SliceImage &img, const std::filesystem::path &path, ImageFormat format);
// Reads either format back, undoing the row flip.
SliceImage read_image(const std::filesystem::path &path);

// "layer_00042.pgm"
std::string layer_file_name(std::size_t layer, const char *extension);

// summary.csv and layers.csv carry only deterministic values; timing.csv
// holds the wall-clock figures.
void write_summary_csv(const SliceSummary &sum, const std::filesystem::path &path);
void write_layers_csv(const SliceSummary &sum, const std::filesystem::path &path);
void write_timing_csv(const SliceSummary &sum, const std::filesystem::path &path);

} // namespace convlat
