#pragma once

// T1MC container format (all integers little-endian):
//
//   offset 0  magic "T1MC"
//          4  version u8 (= 1)
//          5  kind u8 (1 image, 2 field, 3 mask)
//          6  ndim u8 (2 for image/mask, 3 for field)
//          7  reserved u8 (= 0)
//          8  dims u32[ndim]: height, width[, 2]
//          .. payload, row-major: f32 intensities, interleaved f32 (ux, uy),
//             or u8 labels
//
// Masks do not carry a class count on disk; loading infers it as
// max(label) + 1.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "t1moco/tensor.hpp"

namespace t1moco::io {

enum class TensorKind : std::uint8_t { Image = 1, Field = 2, Mask = 3 };

using Tensor = std::variant<Image2D, DisplacementField, LabelMask>;

inline constexpr std::uint8_t kFormatVersion = 1;

std::vector<std::uint8_t> encode(const Image2D& img);
std::vector<std::uint8_t> encode(const DisplacementField& field);
std::vector<std::uint8_t> encode(const LabelMask& mask);
std::vector<std::uint8_t> encode(const Tensor& t);

Tensor decode(std::span<const std::uint8_t> bytes);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

// Typed loaders; throw KindMismatch if the file holds another kind.
Image2D load_image(const std::filesystem::path& path);
DisplacementField load_field(const std::filesystem::path& path);
LabelMask load_mask(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

// Binary P5 with min-max windowing; a constant image exports as mid-gray.
std::vector<std::uint8_t> encode_pgm(const Image2D& img);
void export_pgm(const Image2D& img, const std::filesystem::path& path);

using CsvCell = std::variant<std::string, double, long long>;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<CsvCell>> rows;
};

// Shortest round-trip decimal, always with a '.' for finite integral values
// ("1.0", not "1").
std::string format_number(double v);
std::string to_csv(const CsvTable& table);
void export_csv(const CsvTable& table, const std::filesystem::path& path);

}  // namespace t1moco::io
