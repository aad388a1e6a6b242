#pragma once

// Grid containers shared by every stage of the pipeline.
//
// Conventions: row-major storage, origin at the top-left pixel, x is the
// column index and y the row index. Intensities and displacements are held
// in double precision in memory; the on-disk format stores 32-bit floats.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace t1moco {

enum class ErrorCode {
  BadMagic,
  VersionMismatch,
  TruncatedPayload,
  NonFiniteData,
  KindMismatch,
  IoFailure,
  GridMismatch,
  GridTooSmall,
  InvalidArgument,
  InvalidSpec,
  BadSeries,
  EmptyMask,
  NoLabels,
  NonFiniteLoss,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct GridSize {
  int width = 0;
  int height = 0;

  std::size_t pixels() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  friend bool operator==(const GridSize&, const GridSize&) = default;
};

std::string to_string(GridSize g);

// Throws GridMismatch naming `what` when the two grids differ.
void require_same_grid(GridSize a, GridSize b, std::string_view what);

class Image2D {
 public:
  Image2D() = default;
  Image2D(int width, int height, double fill = 0.0);
  Image2D(int width, int height, std::vector<double> data);

  int width() const noexcept { return grid_.width; }
  int height() const noexcept { return grid_.height; }
  GridSize grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(int x, int y) const { return data_[index(x, y)]; }
  double& operator()(int x, int y) { return data_[index(x, y)]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool all_finite() const noexcept;
  double min() const;
  double max() const;

  friend bool operator==(const Image2D&, const Image2D&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(grid_.width) +
           static_cast<std::size_t>(x);
  }

  GridSize grid_{};
  std::vector<double> data_;
};

// Integer class map. Label 0 is background by convention.
class LabelMask {
 public:
  LabelMask() = default;
  LabelMask(int width, int height, int num_classes);
  LabelMask(int width, int height, std::vector<std::uint8_t> labels, int num_classes);

  int width() const noexcept { return grid_.width; }
  int height() const noexcept { return grid_.height; }
  GridSize grid() const noexcept { return grid_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return labels_.size(); }

  std::uint8_t operator()(int x, int y) const {
    return labels_[static_cast<std::size_t>(y) * grid_.width + x];
  }
  std::uint8_t& operator()(int x, int y) {
    return labels_[static_cast<std::size_t>(y) * grid_.width + x];
  }
  std::uint8_t operator[](std::size_t i) const { return labels_[i]; }

  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::span<std::uint8_t> labels() noexcept { return labels_; }

  std::size_t count(int class_id) const noexcept;
  // Binary indicator image of one class.
  Image2D indicator(int class_id) const;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

 private:
  GridSize grid_{};
  std::vector<std::uint8_t> labels_;
  int num_classes_ = 1;
};

// Dense per-pixel displacement in pixel units, stored as two planes.
class DisplacementField {
 public:
  DisplacementField() = default;
  DisplacementField(int width, int height);
  DisplacementField(int width, int height, std::vector<double> ux, std::vector<double> uy);

  static DisplacementField constant(int width, int height, double ux, double uy);

  int width() const noexcept { return grid_.width; }
  int height() const noexcept { return grid_.height; }
  GridSize grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return ux_.size(); }

  std::span<const double> ux() const noexcept { return ux_; }
  std::span<const double> uy() const noexcept { return uy_; }
  std::span<double> ux() noexcept { return ux_; }
  std::span<double> uy() noexcept { return uy_; }

  bool all_finite() const noexcept;
  double max_magnitude() const noexcept;
  double mean_magnitude() const noexcept;

  DisplacementField& operator+=(const DisplacementField& other);
  DisplacementField& operator*=(double s);

  friend bool operator==(const DisplacementField&, const DisplacementField&) = default;

 private:
  GridSize grid_{};
  std::vector<double> ux_;
  std::vector<double> uy_;
};

DisplacementField operator+(DisplacementField a, const DisplacementField& b);
DisplacementField operator*(DisplacementField a, double s);

// Frames acquired at increasing inversion times, optionally with per-frame
// segmentation masks.
struct T1Series {
  std::vector<Image2D> frames;
  std::vector<double> inversion_times;  // milliseconds
  std::vector<LabelMask> masks;         // empty, or one per frame
  std::size_t reference_index = 0;

  std::size_t size() const noexcept { return frames.size(); }
  GridSize grid() const;
  bool has_masks() const noexcept { return !masks.empty(); }

  // Checks shape consistency and time ordering. `min_frames` differs
  // between registration (2) and fitting (3).
  void validate(std::size_t min_frames = 2) const;
};

}  // namespace t1moco
