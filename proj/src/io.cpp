#include "lsd/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <iterator>
#include <limits>
#include <sstream>

#include "lsd/errors.hpp"

namespace lsd {

namespace fs = std::filesystem;

Bytes read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw ContractError(std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

// Sequential little-endian reader that reports the offset of the first problem.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char* format) : bytes_(bytes), format_(format) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string(format_) + ": truncated " + what, pos_);
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint8_t u8(const char* what) { return take(1, what)[0]; }

  std::uint32_t u32(const char* what) {
    const auto b = take(4, what);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  }

  void magic(const char* expected) {
    const std::size_t at = pos_;
    const auto b = take(4, "magic");
    if (std::memcmp(b.data(), expected, 4) != 0) {
      throw FormatError(std::string(format_) + ": bad magic (expected \"" + expected + "\")", at);
    }
  }

  void finish() const {
    if (remaining() != 0) {
      throw FormatError(std::string(format_) + ": " + std::to_string(remaining()) + " unexpected trailing bytes", pos_);
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  const char* format_;
  std::size_t pos_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------

Bytes encode_voxb(const VoxelGrid& grid) {
  const GridDims d = grid.dims();
  Bytes out{'V', 'O', 'X', 'B', kVoxbVersion};
  put_u32(out, checked_u32(d.x, "voxb dim"));
  put_u32(out, checked_u32(d.y, "voxb dim"));
  put_u32(out, checked_u32(d.z, "voxb dim"));
  const std::size_t payload = (grid.size() + 7) / 8;
  out.resize(kVoxbHeaderSize + payload, 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i]) out[kVoxbHeaderSize + i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return out;
}

VoxelGrid decode_voxb(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "voxb");
  r.magic("VOXB");
  const std::size_t version_at = r.offset();
  if (const auto v = r.u8("version"); v != kVoxbVersion) {
    throw FormatError("voxb: unsupported version " + std::to_string(v), version_at);
  }
  GridDims d;
  d.x = r.u32("dims");
  d.y = r.u32("dims");
  d.z = r.u32("dims");
  const std::size_t n = d.count();
  if (n != 0 && (n / d.x) / d.y != d.z) throw FormatError("voxb: dims overflow", 5);
  const std::size_t payload_at = r.offset();
  const auto payload = r.take((n + 7) / 8, "payload");
  r.finish();
  std::vector<std::uint8_t> voxels(n);
  for (std::size_t i = 0; i < n; ++i) voxels[i] = (payload[i / 8] >> (7 - i % 8)) & 1u;
  if (n % 8 != 0) {
    const std::uint8_t pad_mask = static_cast<std::uint8_t>(0xFFu >> (n % 8));
    if (payload.back() & pad_mask) throw FormatError("voxb: nonzero pad bits", payload_at + payload.size() - 1);
  }
  return VoxelGrid(d, std::move(voxels));
}

void write_voxb(const fs::path& path, const VoxelGrid& grid) { write_bytes(path, encode_voxb(grid)); }

VoxelGrid read_voxb(const fs::path& path) {
  try {
    return decode_voxb(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

Bytes encode_checkpoint(const Model& model) {
  std::map<std::string, Tensor> sorted;
  for (const auto& p : model.state()) {
    if (!sorted.emplace(p.name, p.tensor).second) throw ContractError("duplicate state entry '" + p.name + "'");
  }
  Bytes out{'L', 'S', 'D', 'C', kCheckpointVersion, static_cast<std::uint8_t>(model.kind())};
  put_u32(out, checked_u32(sorted.size(), "entry count"));
  for (const auto& [name, tensor] : sorted) {
    put_u32(out, checked_u32(name.size(), "entry name length"));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, checked_u32(tensor.rank(), "rank"));
    for (std::size_t d : tensor.shape()) put_u32(out, checked_u32(d, "dimension"));
    for (double v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "checkpoint");
  r.magic("LSDC");
  const std::size_t version_at = r.offset();
  if (const auto v = r.u8("version"); v != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(v), version_at);
  }
  const std::size_t kind_at = r.offset();
  const auto kind = r.u8("model kind");
  if (kind > static_cast<std::uint8_t>(ModelKind::kLsdEbm)) {
    throw FormatError("checkpoint: unknown model kind " + std::to_string(kind), kind_at);
  }
  Checkpoint ck;
  ck.kind = static_cast<ModelKind>(kind);
  const std::uint32_t count = r.u32("entry count");
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::size_t entry_at = r.offset();
    const auto name_bytes = r.take(r.u32("name length"), "entry name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint32_t rank = r.u32("rank");
    Shape shape;
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(r.u32("dimension"));
      // Any count beyond the remaining bytes is rejected below; cap it here so it cannot wrap.
      n = shape.back() == 0 ? 0 : std::min(n, r.remaining() + 1) * shape.back();
    }
    if (n > r.remaining() / 4) r.need(n * 4, "tensor data");
    const auto raw = r.take(n * 4, "tensor data");
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) | static_cast<std::uint32_t>(raw[4 * i + 1]) << 8 |
                                 static_cast<std::uint32_t>(raw[4 * i + 2]) << 16 |
                                 static_cast<std::uint32_t>(raw[4 * i + 3]) << 24;
      values[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    if (!ck.entries.emplace(name, Tensor::from(shape, std::move(values))).second) {
      throw FormatError("checkpoint: duplicate entry '" + name + "'", entry_at);
    }
  }
  r.finish();
  return ck;
}

void save_checkpoint(const fs::path& path, const Model& model) { write_bytes(path, encode_checkpoint(model)); }

Checkpoint read_checkpoint(const fs::path& path) {
  try {
    return decode_checkpoint(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::unique_ptr<Model> load_checkpoint(const fs::path& path, ModelKind expected, const TrainConfig& base) {
  Checkpoint ck = read_checkpoint(path);
  if (ck.kind != expected) {
    throw FormatError(path.string() + ": checkpoint holds a '" + to_string(ck.kind) + "' model, expected '" +
                      to_string(expected) + "'");
  }
  return model_from_state(ck.kind, ck.entries, base);
}

// ---------------------------------------------------------------------------

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()), path_(path) {
  if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw ContractError("CSV row has " + std::to_string(cells.size()) + " cells, expected " + std::to_string(columns_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].find_first_of(",\n") != std::string::npos) throw ContractError("CSV cell contains a separator");
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("write to '" + path_.string() + "' failed");
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw FormatError("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size()) {
        throw FormatError(path.string() + ": row " + std::to_string(table.rows.size() + 1) + " has " +
                          std::to_string(cells.size()) + " cells, header has " + std::to_string(table.header.size()));
      }
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw FormatError(path.string() + ": empty CSV file");
  return table;
}

// ---------------------------------------------------------------------------

Montage slice_montage(std::span<const double> values, GridDims dims, std::size_t slices, int axis) {
  if (values.size() != dims.count()) throw ContractError("montage: value count does not match dims " + to_string(dims));
  if (axis < 0 || axis > 2) throw ContractError("montage: axis must be 0, 1 or 2");
  const std::size_t extent[3] = {dims.x, dims.y, dims.z};
  const std::size_t depth = extent[axis];
  if (slices == 0 || slices > depth) {
    throw ContractError("montage: " + std::to_string(slices) + " slices requested, axis has " + std::to_string(depth));
  }
  // In-plane axes (u horizontal, v vertical), in x, y, z order excluding `axis`.
  const int u_axis = axis == 0 ? 1 : 0;
  const int v_axis = axis == 2 ? 1 : 2;
  const std::size_t stride[3] = {1, dims.x, dims.x * dims.y};
  Montage m;
  m.width = slices * extent[u_axis];
  m.height = extent[v_axis];
  m.pixels.assign(m.width * m.height, 0);
  for (std::size_t s = 0; s < slices; ++s) {
    const std::size_t w = (2 * s + 1) * depth / (2 * slices);
    for (std::size_t v = 0; v < extent[v_axis]; ++v) {
      for (std::size_t u = 0; u < extent[u_axis]; ++u) {
        const double val = values[w * stride[axis] + u * stride[u_axis] + v * stride[v_axis]];
        const double c = std::clamp(std::isnan(val) ? 0.0 : val, 0.0, 1.0);
        m.pixels[v * m.width + s * extent[u_axis] + u] = static_cast<std::uint8_t>(std::lround(255.0 * c));
      }
    }
  }
  return m;
}

Bytes encode_pgm(const Montage& montage) {
  const std::string header = "P5\n" + std::to_string(montage.width) + " " + std::to_string(montage.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), montage.pixels.begin(), montage.pixels.end());
  return out;
}

void write_slice_montage(const fs::path& path, std::span<const double> values, GridDims dims, std::size_t slices,
                         int axis) {
  write_bytes(path, encode_pgm(slice_montage(values, dims, slices, axis)));
}

void write_slice_montage(const fs::path& path, const VoxelGrid& grid, std::size_t slices, int axis) {
  const auto values = grid.values();
  write_slice_montage(path, values, grid.dims(), slices, axis);
}

}  // namespace lsd
