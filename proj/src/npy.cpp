#include "npy.hpp"

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "errors.hpp"

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace ssk {

namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
constexpr std::uint64_t kMaxElements = 1ull << 33;

std::string shape_tuple(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) os << shape[i] << ", ";
  if (shape.empty()) os << ",";  // never hit for our tensors, kept for completeness
  std::string s = os.str();
  if (shape.size() == 1) return s.substr(0, s.size() - 1) + ")";  // "(5,)"
  return s.substr(0, s.size() - 2) + ")";
}

void skip_ws(const std::string& s, std::size_t& p) {
  while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
}

}  // namespace

void write_npy(std::ostream& out, const Tensor& t) {
  if (t.absent()) fail(ErrorKind::InvalidArgument, "write_npy: cannot write an absent tensor");
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape_tuple(t.shape) + ", }";
  // pad so that the full header (magic + version + length + dict + newline) is
  // a multiple of 64 bytes
  std::size_t total = 10 + dict.size() + 1;
  const std::size_t pad = (64 - total % 64) % 64;
  dict.append(pad, ' ');
  dict.push_back('\n');
  if (dict.size() > 0xFFFF) fail(ErrorKind::InvalidArgument, "write_npy: header too large");

  out.write(kMagic, 6);
  out.put('\x01');
  out.put('\x00');
  const std::uint16_t hlen = static_cast<std::uint16_t>(dict.size());
  out.put(static_cast<char>(hlen & 0xFF));
  out.put(static_cast<char>(hlen >> 8));
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!out) fail(ErrorKind::Io, "write_npy: stream write failed");
}

void write_npy_file(const std::string& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot open for writing: " + path);
  write_npy(f, t);
  f.close();
  if (!f) fail(ErrorKind::Io, "write failed: " + path);
}

Tensor read_npy(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 6) != 0)
    fail(ErrorKind::MalformedHeader, "not an NPY file (bad magic)");
  if (magic[6] != 1 || magic[7] != 0)
    fail(ErrorKind::MalformedHeader,
         "unsupported NPY version " + std::to_string(magic[6]) + "." + std::to_string(magic[7]));

  unsigned char lenb[2];
  in.read(reinterpret_cast<char*>(lenb), 2);
  if (in.gcount() != 2) fail(ErrorKind::MalformedHeader, "NPY header length missing");
  const std::size_t hlen = static_cast<std::size_t>(lenb[0]) | (static_cast<std::size_t>(lenb[1]) << 8);
  if ((10 + hlen) % 64 != 0)
    fail(ErrorKind::MalformedHeader, "NPY header is not 64-byte aligned");

  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  if (static_cast<std::size_t>(in.gcount()) != hlen)
    fail(ErrorKind::MalformedHeader, "NPY header truncated");

  auto value_after = [&](const std::string& key) -> std::size_t {
    const std::size_t k = header.find("'" + key + "'");
    if (k == std::string::npos) fail(ErrorKind::MalformedHeader, "NPY header missing key '" + key + "'");
    std::size_t p = header.find(':', k);
    if (p == std::string::npos) fail(ErrorKind::MalformedHeader, "NPY header malformed near '" + key + "'");
    ++p;
    skip_ws(header, p);
    return p;
  };

  std::size_t p = value_after("descr");
  if (p >= header.size() || (header[p] != '\'' && header[p] != '"'))
    fail(ErrorKind::MalformedHeader, "NPY descr is not a string");
  const char quote = header[p++];
  const std::size_t dend = header.find(quote, p);
  if (dend == std::string::npos) fail(ErrorKind::MalformedHeader, "NPY descr unterminated");
  const std::string descr = header.substr(p, dend - p);
  if (descr != "<f4")
    fail(ErrorKind::UnsupportedDtype, "unsupported dtype '" + descr + "' (only '<f4' is supported)");

  p = value_after("fortran_order");
  if (header.compare(p, 5, "False") != 0) {
    if (header.compare(p, 4, "True") == 0)
      fail(ErrorKind::UnsupportedDtype, "Fortran-order arrays are not supported");
    fail(ErrorKind::MalformedHeader, "NPY fortran_order is not a boolean");
  }

  p = value_after("shape");
  if (p >= header.size() || header[p] != '(')
    fail(ErrorKind::MalformedHeader, "NPY shape is not a tuple");
  ++p;
  std::vector<int> shape;
  for (;;) {
    skip_ws(header, p);
    if (p >= header.size()) fail(ErrorKind::MalformedHeader, "NPY shape unterminated");
    if (header[p] == ')') break;
    std::size_t used = 0;
    long long dim = 0;
    try {
      dim = std::stoll(header.substr(p), &used);
    } catch (const std::exception&) {
      fail(ErrorKind::MalformedHeader, "NPY shape has a non-integer dimension");
    }
    if (dim < 0 || dim > 0x7FFFFFFF)
      fail(ErrorKind::MalformedHeader, "NPY shape dimension out of range: " + std::to_string(dim));
    shape.push_back(static_cast<int>(dim));
    p += used;
    skip_ws(header, p);
    if (p < header.size() && header[p] == ',') ++p;
  }
  if (shape.empty()) shape = {1};  // 0-d array: treat as a single value

  std::uint64_t count = 1;
  for (int d : shape) {
    count *= static_cast<std::uint64_t>(d);
    if (count > kMaxElements) fail(ErrorKind::MalformedHeader, "NPY array implausibly large");
  }

  Tensor t(shape);
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::uint64_t>(in.gcount()) != count * sizeof(float))
    fail(ErrorKind::TruncatedPayload, "NPY payload truncated: expected " +
                                          std::to_string(count * sizeof(float)) + " bytes, got " +
                                          std::to_string(in.gcount()));
  return t;
}

Tensor read_npy_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open: " + path);
  return read_npy(f);
}

}  // namespace ssk
