#pragma once

// Dense 3-D volume of scalars plus its on-disk container format.
//
// Memory layout is slice-major, rows within a slice, columns within a row:
// flat index = s*H*W + h*W + w. Each slice is viewable as a row-major Eigen
// array without copying.
//
// File format "IVF1" (little-endian throughout):
//   bytes 0-3   magic "IVF1"
//   byte  4     dtype flag: 0 = float32, 1 = float64
//   bytes 5-7   reserved, must be zero
//   bytes 8-19  u32 S, u32 H, u32 W
//   payload     S*H*W scalars, slice-major
// The payload size must match the dimensions exactly; trailing bytes are an
// error. float64 volumes round-trip bit-exactly.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "iscs/core.hpp"

namespace iscs {

struct Dims {
  Index s = 0;
  Index h = 0;
  Index w = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
  Index count() const { return s * h * w; }
};

template <typename Scalar>
class VolumeT {
 public:
  using SliceMap = Eigen::Map<ArrayXXr<Scalar>>;
  using ConstSliceMap = Eigen::Map<const ArrayXXr<Scalar>>;

  VolumeT() = default;

  VolumeT(Index s, Index h, Index w, Scalar fill = Scalar(0)) : dims_{s, h, w} {
    if (s <= 0 || h <= 0 || w <= 0)
      throw DimensionError("VolumeT: dimensions must be positive, got " + dims_str());
    data_ = ArrayX<Scalar>::Constant(s * h * w, fill);
  }

  explicit VolumeT(Dims d, Scalar fill = Scalar(0)) : VolumeT(d.s, d.h, d.w, fill) {}

  Dims dims() const { return dims_; }
  Index slices() const { return dims_.s; }
  Index height() const { return dims_.h; }
  Index width() const { return dims_.w; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  ArrayX<Scalar>& data() { return data_; }
  const ArrayX<Scalar>& data() const { return data_; }

  Scalar& operator()(Index s, Index h, Index w) {
    return data_(flat_index(s, h, w));
  }
  Scalar operator()(Index s, Index h, Index w) const {
    return data_(flat_index(s, h, w));
  }

  SliceMap slice(Index s) {
    check_slice(s);
    return SliceMap(data_.data() + s * dims_.h * dims_.w, dims_.h, dims_.w);
  }
  ConstSliceMap slice(Index s) const {
    check_slice(s);
    return ConstSliceMap(data_.data() + s * dims_.h * dims_.w, dims_.h, dims_.w);
  }

  Index flat_index(Index s, Index h, Index w) const {
    if (s < 0 || s >= dims_.s || h < 0 || h >= dims_.h || w < 0 || w >= dims_.w)
      throw DimensionError("VolumeT: index out of range");
    return (s * dims_.h + h) * dims_.w + w;
  }

  VolumeT same_shape(Scalar fill = Scalar(0)) const { return VolumeT(dims_, fill); }

  template <typename Other>
  bool shape_matches(const VolumeT<Other>& o) const {
    return dims_ == o.dims();
  }

 private:
  void check_slice(Index s) const {
    if (s < 0 || s >= dims_.s) throw DimensionError("VolumeT: slice index out of range");
  }
  std::string dims_str() const {
    return std::to_string(dims_.s) + "x" + std::to_string(dims_.h) + "x" +
           std::to_string(dims_.w);
  }

  Dims dims_;
  ArrayX<Scalar> data_;
};

using Volume = VolumeT<double>;
using VolumeF = VolumeT<float>;

template <typename Scalar = double>
VolumeT<Scalar> make_volume(Index s, Index h, Index w, Scalar fill = Scalar(0)) {
  return VolumeT<Scalar>(s, h, w, fill);
}

template <typename A, typename B>
void require_same_shape(const VolumeT<A>& a, const VolumeT<B>& b, const char* what) {
  if (!a.shape_matches(b))
    throw DimensionError(std::string(what) + ": volume shapes differ");
}

enum class VolumeDtype : std::uint8_t { F32 = 0, F64 = 1 };

namespace detail {

inline void put_u32le(std::vector<unsigned char>& buf, std::uint32_t v) {
  buf.push_back(static_cast<unsigned char>(v));
  buf.push_back(static_cast<unsigned char>(v >> 8));
  buf.push_back(static_cast<unsigned char>(v >> 16));
  buf.push_back(static_cast<unsigned char>(v >> 24));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_u64le(std::vector<unsigned char>& buf, std::uint64_t v) {
  put_u32le(buf, static_cast<std::uint32_t>(v));
  put_u32le(buf, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t get_u64le(const unsigned char* p) {
  return static_cast<std::uint64_t>(get_u32le(p)) |
         (static_cast<std::uint64_t>(get_u32le(p + 4)) << 32);
}

}  // namespace detail

constexpr std::size_t kVolumeHeaderBytes = 20;

template <typename Scalar>
void volume_write(const VolumeT<Scalar>& v, const std::filesystem::path& path,
                  VolumeDtype dtype = VolumeDtype::F64) {
  if (v.empty()) throw DimensionError("volume_write: empty volume");
  const Dims d = v.dims();
  if (d.s > std::numeric_limits<std::uint32_t>::max() ||
      d.h > std::numeric_limits<std::uint32_t>::max() ||
      d.w > std::numeric_limits<std::uint32_t>::max())
    throw FormatError("volume_write: dimension exceeds u32 range");

  std::vector<unsigned char> buf;
  const std::size_t scalar_bytes = dtype == VolumeDtype::F64 ? 8 : 4;
  buf.reserve(kVolumeHeaderBytes + static_cast<std::size_t>(v.size()) * scalar_bytes);
  buf.push_back('I');
  buf.push_back('V');
  buf.push_back('F');
  buf.push_back('1');
  buf.push_back(static_cast<unsigned char>(dtype));
  buf.push_back(0);
  buf.push_back(0);
  buf.push_back(0);
  detail::put_u32le(buf, static_cast<std::uint32_t>(d.s));
  detail::put_u32le(buf, static_cast<std::uint32_t>(d.h));
  detail::put_u32le(buf, static_cast<std::uint32_t>(d.w));

  for (Index i = 0; i < v.size(); ++i) {
    if (dtype == VolumeDtype::F64) {
      const double x = static_cast<double>(v.data()(i));
      std::uint64_t bits;
      std::memcpy(&bits, &x, 8);
      detail::put_u64le(buf, bits);
    } else {
      const float x = static_cast<float>(v.data()(i));
      std::uint32_t bits;
      std::memcpy(&bits, &x, 4);
      detail::put_u32le(buf, bits);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("volume_write: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("volume_write: short write to " + path.string());
}

template <typename Scalar = double>
VolumeT<Scalar> volume_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("volume_read: cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());

  if (buf.size() < kVolumeHeaderBytes)
    throw FormatError("volume_read: truncated header in " + path.string());
  if (buf[0] != 'I' || buf[1] != 'V' || buf[2] != 'F' || buf[3] != '1')
    throw FormatError("volume_read: bad magic in " + path.string());
  if (buf[4] != 0 && buf[4] != 1)
    throw FormatError("volume_read: unknown dtype flag in " + path.string());
  if (buf[5] != 0 || buf[6] != 0 || buf[7] != 0)
    throw FormatError("volume_read: nonzero reserved bytes in " + path.string());

  const VolumeDtype dtype = static_cast<VolumeDtype>(buf[4]);
  const std::uint64_t s = detail::get_u32le(buf.data() + 8);
  const std::uint64_t h = detail::get_u32le(buf.data() + 12);
  const std::uint64_t w = detail::get_u32le(buf.data() + 16);
  if (s == 0 || h == 0 || w == 0)
    throw FormatError("volume_read: zero dimension in " + path.string());
  const std::uint64_t count = s * h * w;
  // Guard the S*H*W*scalar_bytes product against u64 wraparound; each factor
  // is <= 2^32 so two checked steps suffice.
  if (count / s / h != w || count > (std::uint64_t{1} << 48))
    throw FormatError("volume_read: dimension overflow in " + path.string());
  const std::size_t scalar_bytes = dtype == VolumeDtype::F64 ? 8 : 4;
  const std::uint64_t want = kVolumeHeaderBytes + count * scalar_bytes;
  if (buf.size() < want)
    throw FormatError("volume_read: truncated payload in " + path.string());
  if (buf.size() > want)
    throw FormatError("volume_read: trailing bytes in " + path.string());

  VolumeT<Scalar> v(static_cast<Index>(s), static_cast<Index>(h), static_cast<Index>(w));
  const unsigned char* p = buf.data() + kVolumeHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (dtype == VolumeDtype::F64) {
      const std::uint64_t bits = detail::get_u64le(p + i * 8);
      double x;
      std::memcpy(&x, &bits, 8);
      v.data()(static_cast<Index>(i)) = static_cast<Scalar>(x);
    } else {
      const std::uint32_t bits = detail::get_u32le(p + i * 4);
      float x;
      std::memcpy(&x, &bits, 4);
      v.data()(static_cast<Index>(i)) = static_cast<Scalar>(x);
    }
  }
  return v;
}

}  // namespace iscs
