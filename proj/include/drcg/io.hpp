#pragma once

// Binary container for channel sets and beamformer points.
//
// Layout (all integers u32, all reals IEEE-754 f64, little-endian):
//   magic "DRCGBIN1" | kind | K | C | count
//   count x { a | b | rows | cols | rows*cols x (re, im) in row-major order }
// kind 1 = channel set, a = user k, b = cluster c, block H_k^(c)
// kind 2 = PointV, kind 3 = PointX, a = cluster c, b = 0, block V^(c) / X^(c)

#include "drcg/blocks.hpp"
#include "drcg/channel.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace drcg::io {

enum class Kind : std::uint32_t { Channel = 1, PointV = 2, PointX = 3 };

inline constexpr std::array<char, 8> kMagic{'D', 'R', 'C', 'G', 'B', 'I', 'N', '1'};

namespace detail {

inline void put_u32(std::ostream &os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f64(std::ostream &os, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_bytes(std::istream &is, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof())
      throw Error(ErrorCode::Io, "container: unexpected end of stream");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

inline std::uint32_t get_u32(std::istream &is) {
  return static_cast<std::uint32_t>(get_bytes(is, 4));
}
inline double get_f64(std::istream &is) { return std::bit_cast<double>(get_bytes(is, 8)); }

inline void put_matrix(std::ostream &os, std::uint32_t a, std::uint32_t b, const CMat &M) {
  put_u32(os, a);
  put_u32(os, b);
  put_u32(os, static_cast<std::uint32_t>(M.rows()));
  put_u32(os, static_cast<std::uint32_t>(M.cols()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      put_f64(os, M(i, j).real());
      put_f64(os, M(i, j).imag());
    }
}

struct Entry {
  std::uint32_t a = 0, b = 0;
  CMat M;
};

struct Container {
  Kind kind{};
  std::uint32_t K = 0, C = 0;
  std::vector<Entry> entries;
};

inline void write_container(std::ostream &os, const Container &c) {
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, static_cast<std::uint32_t>(c.kind));
  put_u32(os, c.K);
  put_u32(os, c.C);
  put_u32(os, static_cast<std::uint32_t>(c.entries.size()));
  for (const auto &e : c.entries) put_matrix(os, e.a, e.b, e.M);
  if (!os) throw Error(ErrorCode::Io, "container: write failed");
}

inline Container read_container(std::istream &is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw Error(ErrorCode::Io, "container: bad magic");
  Container c;
  c.kind = static_cast<Kind>(get_u32(is));
  c.K = get_u32(is);
  c.C = get_u32(is);
  const std::uint32_t count = get_u32(is);
  for (std::uint32_t n = 0; n < count; ++n) {
    Entry e;
    e.a = get_u32(is);
    e.b = get_u32(is);
    const std::uint32_t rows = get_u32(is), cols = get_u32(is);
    e.M.resize(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) {
        const double re = get_f64(is);
        const double im = get_f64(is);
        e.M(i, j) = Complex(re, im);
      }
    c.entries.push_back(std::move(e));
  }
  return c;
}

template <class Point> Container point_container(const Point &p, Kind kind) {
  Container c{kind, static_cast<std::uint32_t>(p.K()), static_cast<std::uint32_t>(p.C()), {}};
  for (int i = 0; i < p.C(); ++i) c.entries.push_back({static_cast<std::uint32_t>(i), 0, p.cluster(i)});
  return c;
}

template <class Point> Point point_from(const Container &c, Kind kind) {
  if (c.kind != kind) throw Error(ErrorCode::Io, "container: unexpected kind");
  if (c.entries.size() != c.C) throw Error(ErrorCode::Io, "container: point block count != C");
  Blocks blocks(c.C);
  for (const auto &e : c.entries) {
    if (e.a >= c.C) throw Error(ErrorCode::Io, "container: cluster index out of range");
    blocks[e.a] = e.M;
  }
  return Point::from_clusters(std::move(blocks), static_cast<int>(c.K));
}

} // namespace detail

inline void write_channel(std::ostream &os, const ChannelSet &ch) {
  detail::Container c{Kind::Channel, static_cast<std::uint32_t>(ch.K()),
                      static_cast<std::uint32_t>(ch.C()), {}};
  for (int k = 0; k < ch.K(); ++k)
    for (int cl = 0; cl < ch.C(); ++cl)
      c.entries.push_back({static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(cl),
                           ch.block(k, cl)});
  detail::write_container(os, c);
}

inline ChannelSet read_channel(std::istream &is) {
  const auto c = detail::read_container(is);
  if (c.kind != Kind::Channel) throw Error(ErrorCode::Io, "container: not a channel set");
  if (c.entries.size() != static_cast<std::size_t>(c.K) * c.C)
    throw Error(ErrorCode::Io, "container: channel block count != K*C");
  std::vector<CMat> blocks(c.entries.size());
  for (const auto &e : c.entries) {
    if (e.a >= c.K || e.b >= c.C) throw Error(ErrorCode::Io, "container: index out of range");
    blocks[e.a * c.C + e.b] = e.M;
  }
  return ChannelSet(static_cast<int>(c.K), static_cast<int>(c.C), std::move(blocks));
}

inline void write_point(std::ostream &os, const PointV &V) {
  detail::write_container(os, detail::point_container(V, Kind::PointV));
}
inline void write_point(std::ostream &os, const PointX &X) {
  detail::write_container(os, detail::point_container(X, Kind::PointX));
}
inline PointV read_point_v(std::istream &is) {
  return detail::point_from<PointV>(detail::read_container(is), Kind::PointV);
}
inline PointX read_point_x(std::istream &is) {
  return detail::point_from<PointX>(detail::read_container(is), Kind::PointX);
}

template <class Fn> void with_output_file(const std::string &path, Fn &&fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  fn(os);
}

template <class Fn> auto with_input_file(const std::string &path, Fn &&fn) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return fn(is);
}

} // namespace drcg::io
