#include "t1moco/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace t1moco {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::GridTooSmall: return "GridTooSmall";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::BadSeries: return "BadSeries";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NoLabels: return "NoLabels";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

std::string to_string(GridSize g) {
  return std::to_string(g.width) + "x" + std::to_string(g.height);
}

void require_same_grid(GridSize a, GridSize b, std::string_view what) {
  if (a != b) {
    throw Error(ErrorCode::GridMismatch,
                std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
  }
}

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "grid dimensions must be positive, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
}

std::size_t pixel_count(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

// ---------------------------------------------------------------------------

Image2D::Image2D(int width, int height, double fill) : grid_{width, height} {
  check_dims(width, height);
  data_.assign(pixel_count(width, height), fill);
}

Image2D::Image2D(int width, int height, std::vector<double> data)
    : grid_{width, height}, data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != pixel_count(width, height)) {
    throw Error(ErrorCode::InvalidArgument, "image data length " + std::to_string(data_.size()) +
                                                " does not match " + to_string(grid_));
  }
}

bool Image2D::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Image2D::min() const { return *std::min_element(data_.begin(), data_.end()); }
double Image2D::max() const { return *std::max_element(data_.begin(), data_.end()); }

// ---------------------------------------------------------------------------

LabelMask::LabelMask(int width, int height, int num_classes)
    : grid_{width, height}, num_classes_(num_classes) {
  check_dims(width, height);
  if (num_classes < 1 || num_classes > 256) {
    throw Error(ErrorCode::InvalidArgument, "num_classes out of range");
  }
  labels_.assign(pixel_count(width, height), 0);
}

LabelMask::LabelMask(int width, int height, std::vector<std::uint8_t> labels, int num_classes)
    : grid_{width, height}, labels_(std::move(labels)), num_classes_(num_classes) {
  check_dims(width, height);
  if (num_classes < 1 || num_classes > 256) {
    throw Error(ErrorCode::InvalidArgument, "num_classes out of range");
  }
  if (labels_.size() != pixel_count(width, height)) {
    throw Error(ErrorCode::InvalidArgument, "mask length does not match grid");
  }
  for (auto l : labels_) {
    if (l >= num_classes) {
      throw Error(ErrorCode::InvalidArgument,
                  "label " + std::to_string(l) + " >= num_classes " + std::to_string(num_classes));
    }
  }
}

std::size_t LabelMask::count(int class_id) const noexcept {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), static_cast<std::uint8_t>(class_id)));
}

Image2D LabelMask::indicator(int class_id) const {
  Image2D out(grid_.width, grid_.height);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    out[i] = labels_[i] == class_id ? 1.0 : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------

DisplacementField::DisplacementField(int width, int height) : grid_{width, height} {
  check_dims(width, height);
  ux_.assign(pixel_count(width, height), 0.0);
  uy_.assign(pixel_count(width, height), 0.0);
}

DisplacementField::DisplacementField(int width, int height, std::vector<double> ux,
                                     std::vector<double> uy)
    : grid_{width, height}, ux_(std::move(ux)), uy_(std::move(uy)) {
  check_dims(width, height);
  if (ux_.size() != pixel_count(width, height) || uy_.size() != ux_.size()) {
    throw Error(ErrorCode::InvalidArgument, "field planes do not match grid");
  }
}

DisplacementField DisplacementField::constant(int width, int height, double ux, double uy) {
  DisplacementField f(width, height);
  std::fill(f.ux_.begin(), f.ux_.end(), ux);
  std::fill(f.uy_.begin(), f.uy_.end(), uy);
  return f;
}

bool DisplacementField::all_finite() const noexcept {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(ux_.begin(), ux_.end(), finite) && std::all_of(uy_.begin(), uy_.end(), finite);
}

double DisplacementField::max_magnitude() const noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < ux_.size(); ++i) m = std::max(m, std::hypot(ux_[i], uy_[i]));
  return m;
}

double DisplacementField::mean_magnitude() const noexcept {
  if (ux_.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < ux_.size(); ++i) s += std::hypot(ux_[i], uy_[i]);
  return s / static_cast<double>(ux_.size());
}

DisplacementField& DisplacementField::operator+=(const DisplacementField& other) {
  require_same_grid(grid_, other.grid_, "field addition");
  for (std::size_t i = 0; i < ux_.size(); ++i) {
    ux_[i] += other.ux_[i];
    uy_[i] += other.uy_[i];
  }
  return *this;
}

DisplacementField& DisplacementField::operator*=(double s) {
  for (auto& v : ux_) v *= s;
  for (auto& v : uy_) v *= s;
  return *this;
}

DisplacementField operator+(DisplacementField a, const DisplacementField& b) { return a += b; }
DisplacementField operator*(DisplacementField a, double s) { return a *= s; }

// ---------------------------------------------------------------------------

GridSize T1Series::grid() const {
  if (frames.empty()) return {};
  return frames.front().grid();
}

void T1Series::validate(std::size_t min_frames) const {
  if (frames.size() < min_frames) {
    throw Error(ErrorCode::BadSeries, "series needs at least " + std::to_string(min_frames) +
                                          " frames, has " + std::to_string(frames.size()));
  }
  if (inversion_times.size() != frames.size()) {
    throw Error(ErrorCode::BadSeries, "inversion time count does not match frame count");
  }
  for (std::size_t i = 1; i < inversion_times.size(); ++i) {
    if (!(inversion_times[i] > inversion_times[i - 1])) {
      throw Error(ErrorCode::BadSeries, "inversion times must be strictly increasing (index " +
                                            std::to_string(i) + ")");
    }
  }
  if (reference_index >= frames.size()) {
    throw Error(ErrorCode::BadSeries, "reference index out of range");
  }
  const GridSize g = grid();
  for (const auto& f : frames) require_same_grid(g, f.grid(), "series frame");
  if (!masks.empty()) {
    if (masks.size() != frames.size()) {
      throw Error(ErrorCode::BadSeries, "mask count does not match frame count");
    }
    for (const auto& m : masks) require_same_grid(g, m.grid(), "series mask");
  }
}

}  // namespace t1moco
