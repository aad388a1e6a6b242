#include "t1moco/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace t1moco::io {
namespace {

constexpr std::uint8_t kMagic[4] = {'T', '1', 'M', 'C'};
constexpr std::size_t kPreambleSize = 8;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  void reserve(std::size_t n) { out_.reserve(n); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : buf_(b) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n) {
      throw Error(ErrorCode::TruncatedPayload,
                  std::string("truncated ") + what + " at byte offset " + std::to_string(pos_) +
                      " (need " + std::to_string(n) + " bytes, have " +
                      std::to_string(buf_.size() - pos_) + ")");
    }
  }
  std::uint8_t u8() {
    need(1, "header");
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4, "header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return std::bit_cast<float>(v);
  }
  std::uint8_t raw_u8() { return buf_[pos_++]; }

 private:
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

void header(Writer& w, TensorKind kind, std::initializer_list<std::uint32_t> dims) {
  w.bytes(kMagic);
  w.u8(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  w.u8(static_cast<std::uint8_t>(dims.size()));
  w.u8(0);
  for (auto d : dims) w.u32(d);
}

float to_f32_checked(double v, std::size_t index) {
  const float f = static_cast<float>(v);
  if (!std::isfinite(v) || !std::isfinite(f)) {
    throw Error(ErrorCode::NonFiniteData, "non-finite value at element " + std::to_string(index) +
                                              ", refusing to encode");
  }
  return f;
}

}  // namespace

std::vector<std::uint8_t> encode(const Image2D& img) {
  Writer w;
  w.reserve(kPreambleSize + 8 + img.size() * 4);
  header(w, TensorKind::Image,
         {static_cast<std::uint32_t>(img.height()), static_cast<std::uint32_t>(img.width())});
  for (std::size_t i = 0; i < img.size(); ++i) w.f32(to_f32_checked(img[i], i));
  return w.take();
}

std::vector<std::uint8_t> encode(const DisplacementField& field) {
  Writer w;
  w.reserve(kPreambleSize + 12 + field.size() * 8);
  header(w, TensorKind::Field,
         {static_cast<std::uint32_t>(field.height()), static_cast<std::uint32_t>(field.width()), 2u});
  const auto ux = field.ux();
  const auto uy = field.uy();
  for (std::size_t i = 0; i < field.size(); ++i) {
    w.f32(to_f32_checked(ux[i], 2 * i));
    w.f32(to_f32_checked(uy[i], 2 * i + 1));
  }
  return w.take();
}

std::vector<std::uint8_t> encode(const LabelMask& mask) {
  Writer w;
  w.reserve(kPreambleSize + 8 + mask.size());
  header(w, TensorKind::Mask,
         {static_cast<std::uint32_t>(mask.height()), static_cast<std::uint32_t>(mask.width())});
  w.bytes(mask.labels());
  return w.take();
}

std::vector<std::uint8_t> encode(const Tensor& t) {
  return std::visit([](const auto& v) { return encode(v); }, t);
}

Tensor decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw Error(ErrorCode::BadMagic, "expected \"T1MC\" at byte offset 0");
  }
  for (int i = 0; i < 4; ++i) r.u8();

  const std::size_t version_at = r.offset();
  const auto version = r.u8();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "unsupported version " + std::to_string(version) +
                                                " at byte offset " + std::to_string(version_at));
  }
  const std::size_t kind_at = r.offset();
  const auto kind = r.u8();
  const std::size_t ndim_at = r.offset();
  const auto ndim = r.u8();
  r.u8();  // reserved

  const bool is_field = kind == static_cast<std::uint8_t>(TensorKind::Field);
  if (kind < 1 || kind > 3) {
    throw Error(ErrorCode::KindMismatch,
                "unknown kind " + std::to_string(kind) + " at byte offset " + std::to_string(kind_at));
  }
  const std::uint8_t expected_ndim = is_field ? 3 : 2;
  if (ndim != expected_ndim) {
    throw Error(ErrorCode::KindMismatch, "ndim " + std::to_string(ndim) + " invalid for kind " +
                                             std::to_string(kind) + " at byte offset " +
                                             std::to_string(ndim_at));
  }

  const std::size_t dims_at = r.offset();
  const std::uint32_t height = r.u32();
  const std::uint32_t width = r.u32();
  if (is_field) {
    const std::uint32_t channels = r.u32();
    if (channels != 2) {
      throw Error(ErrorCode::KindMismatch, "field must have 2 channels, header at byte offset " +
                                               std::to_string(dims_at + 8) + " says " +
                                               std::to_string(channels));
    }
  }
  constexpr std::uint32_t kMaxDim = 1u << 15;
  if (width == 0 || height == 0 || width > kMaxDim || height > kMaxDim) {
    throw Error(ErrorCode::KindMismatch,
                "invalid dims at byte offset " + std::to_string(dims_at));
  }
  const int w = static_cast<int>(width);
  const int h = static_cast<int>(height);
  const std::size_t n = static_cast<std::size_t>(width) * height;

  switch (static_cast<TensorKind>(kind)) {
    case TensorKind::Image: {
      r.need(n * 4, "image payload");
      std::vector<double> data(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = r.offset();
        const float v = r.f32();
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::NonFiniteData, "non-finite value at byte offset " + std::to_string(at));
        }
        data[i] = v;
      }
      return Image2D(w, h, std::move(data));
    }
    case TensorKind::Field: {
      r.need(n * 8, "field payload");
      std::vector<double> ux(n), uy(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (double* dst : {&ux[i], &uy[i]}) {
          const std::size_t at = r.offset();
          const float v = r.f32();
          if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFiniteData,
                        "non-finite value at byte offset " + std::to_string(at));
          }
          *dst = v;
        }
      }
      return DisplacementField(w, h, std::move(ux), std::move(uy));
    }
    case TensorKind::Mask: {
      r.need(n, "mask payload");
      std::vector<std::uint8_t> labels(n);
      int max_label = 0;
      for (std::size_t i = 0; i < n; ++i) {
        labels[i] = r.raw_u8();
        max_label = std::max<int>(max_label, labels[i]);
      }
      return LabelMask(w, h, std::move(labels), max_label + 1);
    }
  }
  throw Error(ErrorCode::KindMismatch, "unreachable");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  // Encoding validates finiteness before anything touches the disk.
  const auto bytes = encode(t);
  write_file(path, bytes);
}

Tensor load_tensor(const std::filesystem::path& path) { return decode(read_file(path)); }

namespace {

template <class T>
T load_as(const std::filesystem::path& path, const char* kind) {
  Tensor t = load_tensor(path);
  if (auto* v = std::get_if<T>(&t)) return std::move(*v);
  throw Error(ErrorCode::KindMismatch, path.string() + " does not hold " + kind);
}

}  // namespace

Image2D load_image(const std::filesystem::path& path) { return load_as<Image2D>(path, "an image"); }
DisplacementField load_field(const std::filesystem::path& path) {
  return load_as<DisplacementField>(path, "a field");
}
LabelMask load_mask(const std::filesystem::path& path) { return load_as<LabelMask>(path, "a mask"); }

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_pgm(const Image2D& img) {
  if (!img.all_finite()) throw Error(ErrorCode::NonFiniteData, "cannot export non-finite image");
  const std::string head =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.reserve(head.size() + img.size());
  const double lo = img.min();
  const double hi = img.max();
  const double range = hi - lo;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!(range > 0.0)) {
      out.push_back(128);
      continue;
    }
    const double v = std::round((img[i] - lo) / range * 255.0);
    out.push_back(static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)));
  }
  return out;
}

void export_pgm(const Image2D& img, const std::filesystem::path& path) {
  write_file(path, encode_pgm(img));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

struct CellFormatter {
  std::string operator()(const std::string& s) const { return quote_field(s); }
  std::string operator()(double d) const { return format_number(d); }
  std::string operator()(long long i) const { return std::to_string(i); }
};

}  // namespace

std::string to_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    out += quote_field(table.header[i]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += std::visit(CellFormatter{}, row[i]);
    }
    out += '\n';
  }
  return out;
}

void export_csv(const CsvTable& table, const std::filesystem::path& path) {
  write_text(path, to_csv(table));
}

}  // namespace t1moco::io
