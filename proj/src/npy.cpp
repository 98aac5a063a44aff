#include "seqcr/npy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>
#include <vector>

static_assert(std::endian::native == std::endian::little, "npy I/O assumes a little-endian host");

namespace seqcr {

namespace {

const char kMagic[] = "\x93NUMPY";

std::string descr(NpyDtype d) {
  switch (d) {
    case NpyDtype::U16: return "<u2";
    case NpyDtype::F32: return "<f4";
    case NpyDtype::F64: return "<f8";
  }
  return "";
}

std::size_t item_size(NpyDtype d) {
  switch (d) {
    case NpyDtype::U16: return 2;
    case NpyDtype::F32: return 4;
    case NpyDtype::F64: return 8;
  }
  return 0;
}

}  // namespace

double quantize(double v, NpyDtype dtype) {
  switch (dtype) {
    case NpyDtype::U16: return std::clamp(std::round(v), 0.0, 65535.0);
    case NpyDtype::F32: return static_cast<double>(static_cast<float>(v));
    case NpyDtype::F64: return v;
  }
  return v;
}

void write_npy(const std::filesystem::path& path, const Tensor& tensor, NpyDtype dtype) {
  std::ostringstream header;
  header << "{'descr': '" << descr(dtype) << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < tensor.ndim(); ++i) {
    header << tensor.dim(i);
    if (tensor.ndim() == 1 || i + 1 < tensor.ndim()) header << ",";
    if (i + 1 < tensor.ndim()) header << " ";
  }
  header << "), }";
  std::string h = header.str();
  const std::size_t unpadded = 10 + h.size() + 1;
  h.append((64 - unpadded % 64) % 64, ' ');
  h.push_back('\n');

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RasterIoError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(h.size());
  out.write(reinterpret_cast<const char*>(&len), 2);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));

  const std::size_t n = tensor.numel();
  switch (dtype) {
    case NpyDtype::U16: {
      std::vector<std::uint16_t> buf(n);
      for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<std::uint16_t>(quantize(tensor[i], dtype));
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n * 2));
      break;
    }
    case NpyDtype::F32: {
      std::vector<float> buf(n);
      for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(tensor[i]);
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n * 4));
      break;
    }
    case NpyDtype::F64:
      out.write(reinterpret_cast<const char*>(tensor.data()), static_cast<std::streamsize>(n * 8));
      break;
  }
  if (!out) throw RasterIoError("failed writing '" + path.string() + "'");
}

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RasterIoError("cannot open raster '" + path.string() + "'");
  char magic[6];
  char version[2];
  in.read(magic, 6);
  in.read(version, 2);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) throw RasterIoError("'" + path.string() + "' is not an .npy file");
  std::size_t header_len = 0;
  if (version[0] == 1) {
    std::uint16_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 2);
    header_len = len;
  } else {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    header_len = len;
  }
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw RasterIoError("truncated header in '" + path.string() + "'");

  static const std::regex descr_re(R"('descr':\s*'([^']+)')");
  static const std::regex order_re(R"('fortran_order':\s*(True|False))");
  static const std::regex shape_re(R"('shape':\s*\(([^)]*)\))");
  std::smatch m;
  NpyArray arr;
  if (!std::regex_search(header, m, descr_re)) throw RasterIoError("missing dtype in '" + path.string() + "'");
  const std::string d = m[1];
  if (d == "<u2") arr.dtype = NpyDtype::U16;
  else if (d == "<f4") arr.dtype = NpyDtype::F32;
  else if (d == "<f8") arr.dtype = NpyDtype::F64;
  else throw RasterIoError("unsupported dtype '" + d + "' in '" + path.string() + "'");
  if (!std::regex_search(header, m, order_re) || m[1] == "True") {
    throw RasterIoError("'" + path.string() + "' must be C-ordered");
  }
  if (!std::regex_search(header, m, shape_re)) throw RasterIoError("missing shape in '" + path.string() + "'");
  std::vector<int> shape;
  std::stringstream ss(m[1].str());
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.find_first_not_of(" ") == std::string::npos) continue;
    shape.push_back(std::stoi(tok));
  }

  const std::size_t n = shape_numel(shape);
  std::vector<char> raw(n * item_size(arr.dtype));
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw RasterIoError("truncated payload in '" + path.string() + "'");
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (arr.dtype) {
      case NpyDtype::U16: {
        std::uint16_t v;
        std::memcpy(&v, raw.data() + 2 * i, 2);
        values[i] = v;
        break;
      }
      case NpyDtype::F32: {
        float v;
        std::memcpy(&v, raw.data() + 4 * i, 4);
        values[i] = v;
        break;
      }
      case NpyDtype::F64: std::memcpy(&values[i], raw.data() + 8 * i, 8); break;
    }
  }
  arr.tensor = Tensor(std::move(shape), std::move(values));
  return arr;
}

}  // namespace seqcr
