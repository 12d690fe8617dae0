#include "svmpc/valuefn.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace svmpc {

namespace {

struct CellLocation {
  std::array<std::size_t, kMaxStateDim> lower_offset{};
  std::array<std::size_t, kMaxStateDim> upper_offset{};
  std::array<double, kMaxStateDim> frac{};
  bool extrapolated = false;
};

CellLocation locate(const Grid& grid, std::span<const double> x) {
  const int n = grid.ndims();
  if (static_cast<int>(x.size()) != n) {
    throw ContractViolation("interpolate: query dimension does not match grid");
  }
  CellLocation cell;
  for (int i = 0; i < n; ++i) {
    if (std::isnan(x[i])) throw ContractViolation("interpolate: NaN query coordinate");
    const Axis& axis = grid.axis(i);
    const double dx = grid.spacing(i);
    int lower;
    double frac;
    if (axis.periodic) {
      double t = std::fmod((x[i] - axis.lo) / dx, static_cast<double>(axis.count));
      if (t < 0.0) t += axis.count;
      if (t >= axis.count) t -= axis.count;
      lower = static_cast<int>(std::ceil(t)) - 1;
      frac = t - lower;
      if (lower < 0) lower += axis.count;
      cell.upper_offset[i] = static_cast<std::size_t>((lower + 1) % axis.count) * grid.stride(i);
    } else {
      double xc = x[i];
      if (xc < axis.lo || xc > axis.hi) {
        xc = std::clamp(xc, axis.lo, axis.hi);
        cell.extrapolated = true;
      }
      const double t = (xc - axis.lo) / dx;
      lower = std::clamp(static_cast<int>(std::ceil(t)) - 1, 0, axis.count - 2);
      frac = std::clamp(t - lower, 0.0, 1.0);
      cell.upper_offset[i] = static_cast<std::size_t>(lower + 1) * grid.stride(i);
    }
    cell.lower_offset[i] = static_cast<std::size_t>(lower) * grid.stride(i);
    cell.frac[i] = frac;
  }
  return cell;
}

// Little-endian byte writer/reader.
class ByteWriter {
 public:
  void bytes(const char* data, std::size_t n) { out_.append(data, n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }

  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
    return std::bit_cast<double>(v);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw ValueFileError(ValueFileError::Kind::Truncated,
                           std::string("value file truncated while reading ") + what);
    }
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'H', 'J', 'V', 'F'};

}  // namespace

Interpolation interpolate_ex(const ValueField& field, std::span<const double> x) {
  const Grid& grid = field.grid;
  const CellLocation cell = locate(grid, x);
  const int n = grid.ndims();
  const unsigned corners = 1u << n;
  double acc = 0.0;
  for (unsigned c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t offset = 0;
    for (int i = 0; i < n; ++i) {
      if ((c >> i) & 1u) {
        w *= cell.frac[i];
        offset += cell.upper_offset[i];
      } else {
        w *= 1.0 - cell.frac[i];
        offset += cell.lower_offset[i];
      }
    }
    if (w != 0.0) acc += w * field.values[offset];
  }
  return {acc, cell.extrapolated};
}

double interpolate(const ValueField& field, const State& x) {
  return interpolate_ex(field, {x.data(), static_cast<std::size_t>(x.size())}).value;
}

ValueAndGradient value_and_gradient(const ValueField& field, std::span<const double> x) {
  const Grid& grid = field.grid;
  const CellLocation cell = locate(grid, x);
  const int n = grid.ndims();
  const unsigned corners = 1u << n;

  ValueAndGradient out;
  out.gradient = Costate::Zero(n);
  out.extrapolated = cell.extrapolated;
  for (unsigned c = 0; c < corners; ++c) {
    std::size_t offset = 0;
    std::array<double, kMaxStateDim> w{};
    for (int i = 0; i < n; ++i) {
      const bool upper = (c >> i) & 1u;
      w[i] = upper ? cell.frac[i] : 1.0 - cell.frac[i];
      offset += upper ? cell.upper_offset[i] : cell.lower_offset[i];
    }
    const double v = field.values[offset];
    double full = v;
    for (int i = 0; i < n; ++i) full *= w[i];
    out.value += full;
    for (int i = 0; i < n; ++i) {
      double partial = ((c >> i) & 1u) ? v : -v;
      for (int j = 0; j < n; ++j) {
        if (j != i) partial *= w[j];
      }
      out.gradient[i] += partial / grid.spacing(i);
    }
  }
  return out;
}

Costate gradient(const ValueField& field, const State& x) {
  return value_and_gradient(field, {x.data(), static_cast<std::size_t>(x.size())}).gradient;
}

SafetyOracle::SafetyOracle(std::shared_ptr<const ValueField> field, double margin)
    : field_(std::move(field)), margin_(margin) {
  if (!field_) throw ContractViolation("SafetyOracle: null value field");
  if (!std::isfinite(margin_)) throw ContractViolation("SafetyOracle: margin must be finite");
}

ValueAndGradient SafetyOracle::value_and_gradient(const State& x) const {
  return svmpc::value_and_gradient(*field_, {x.data(), static_cast<std::size_t>(x.size())});
}

std::string encode_value_field(const ValueField& field) {
  if (field.values.size() != field.grid.node_count()) {
    throw ContractViolation("encode_value_field: values length does not match grid");
  }
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(kValueFileVersion);
  w.u32(static_cast<std::uint32_t>(field.grid.ndims()));
  for (const Axis& a : field.grid.axes()) {
    w.f64(a.lo);
    w.f64(a.hi);
    w.u32(static_cast<std::uint32_t>(a.count));
    w.u8(a.periodic ? 1 : 0);
  }
  for (double v : field.values) w.f64(v);
  return w.take();
}

ValueField decode_value_field(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || std::memcmp(r.bytes(4, "magic").data(), kMagic, 4) != 0) {
    throw ValueFileError(ValueFileError::Kind::BadMagic, "not an HJVF value file (bad magic)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kValueFileVersion) {
    throw ValueFileError(ValueFileError::Kind::VersionMismatch,
                         "unsupported HJVF version " + std::to_string(version));
  }
  const std::uint32_t ndims = r.u32("ndims");
  if (ndims == 0 || ndims > static_cast<std::uint32_t>(kMaxStateDim)) {
    throw ValueFileError(ValueFileError::Kind::BadHeader,
                         "HJVF ndims out of range: " + std::to_string(ndims));
  }
  std::vector<Axis> axes(ndims);
  for (auto& a : axes) {
    a.lo = r.f64("axis lo");
    a.hi = r.f64("axis hi");
    a.count = static_cast<int>(r.u32("axis count"));
    const std::uint8_t periodic = r.u8("axis periodic flag");
    if (periodic > 1) throw ValueFileError(ValueFileError::Kind::BadHeader, "HJVF periodic flag must be 0 or 1");
    a.periodic = periodic == 1;
  }
  Grid grid;
  try {
    grid = Grid(std::move(axes));
  } catch (const ContractViolation& e) {
    throw ValueFileError(ValueFileError::Kind::BadHeader, std::string("HJVF header: ") + e.what());
  }
  const std::size_t expected = grid.node_count();
  if (r.remaining() != expected * 8) {
    std::ostringstream msg;
    msg << "HJVF payload has " << r.remaining() << " bytes, grid requires " << expected * 8;
    throw ValueFileError(ValueFileError::Kind::Truncated, msg.str());
  }
  std::vector<double> values(expected);
  for (auto& v : values) v = r.f64("values");
  return ValueField(std::move(grid), std::move(values));
}

void save_value_field(const ValueField& field, const std::filesystem::path& path) {
  const std::string bytes = encode_value_field(field);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValueFileError(ValueFileError::Kind::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValueFileError(ValueFileError::Kind::Io, "write failed: " + path.string());
}

ValueField load_value_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValueFileError(ValueFileError::Kind::Io, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_value_field(bytes);
}

}  // namespace svmpc
