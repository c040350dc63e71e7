#include "comet/npy.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

namespace comet {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

struct Header {
  char byte_order = '<';
  std::size_t item_size = 8;
  bool fortran_order = false;
  std::vector<std::int64_t> shape;
};

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorCode::MalformedHeader, "malformed NPY header: " + why);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Returns the raw text following `'key':` up to (not including) the next
// top-level comma or closing brace.
std::string_view dict_value(std::string_view dict, std::string_view key) {
  std::string needle = "'" + std::string(key) + "'";
  auto pos = dict.find(needle);
  if (pos == std::string_view::npos) {
    needle = "\"" + std::string(key) + "\"";
    pos = dict.find(needle);
  }
  if (pos == std::string_view::npos) malformed("missing key " + std::string(key));
  pos = dict.find(':', pos + needle.size());
  if (pos == std::string_view::npos) malformed("missing ':' after " + std::string(key));
  ++pos;
  int depth = 0;
  std::size_t end = pos;
  for (; end < dict.size(); ++end) {
    const char c = dict[end];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (depth == 0 && (c == ',' || c == '}')) break;
  }
  if (depth != 0) malformed("unbalanced parentheses");
  return trim(dict.substr(pos, end - pos));
}

Header parse_header(std::string_view dict) {
  Header h;
  auto descr = dict_value(dict, "descr");
  if (descr.size() < 3 || (descr.front() != '\'' && descr.front() != '"')) {
    malformed("bad descr");
  }
  descr = descr.substr(1, descr.size() - 2);
  if (descr.size() != 3) {
    throw Error(ErrorCode::UnsupportedDtype, "unsupported dtype " + std::string(descr));
  }
  const char order = descr[0];
  if (order != '<' && order != '>' && order != '=') {
    throw Error(ErrorCode::UnsupportedDtype, "unsupported dtype " + std::string(descr));
  }
  if (descr[1] != 'f' || (descr[2] != '4' && descr[2] != '8')) {
    throw Error(ErrorCode::UnsupportedDtype, "unsupported dtype " + std::string(descr));
  }
  h.byte_order = order == '=' ? (std::endian::native == std::endian::little ? '<' : '>')
                              : order;
  h.item_size = descr[2] == '4' ? 4 : 8;

  auto fortran = dict_value(dict, "fortran_order");
  if (fortran == "True") {
    h.fortran_order = true;
  } else if (fortran != "False") {
    malformed("bad fortran_order");
  }

  auto shape = dict_value(dict, "shape");
  if (shape.size() < 2 || shape.front() != '(' || shape.back() != ')') malformed("bad shape");
  shape = shape.substr(1, shape.size() - 2);
  std::string item;
  std::istringstream in{std::string(shape)};
  while (std::getline(in, item, ',')) {
    auto t = trim(item);
    if (t.empty()) continue;
    std::int64_t v = 0;
    try {
      std::size_t used = 0;
      v = std::stoll(std::string(t), &used);
      if (used != t.size()) malformed("bad shape entry");
    } catch (const std::logic_error&) {
      malformed("bad shape entry");
    }
    if (v < 0) malformed("negative shape entry");
    h.shape.push_back(v);
  }
  return h;
}

inline std::uint32_t swap_bytes(std::uint32_t v) { return __builtin_bswap32(v); }
inline std::uint64_t swap_bytes(std::uint64_t v) { return __builtin_bswap64(v); }

template <typename T>
T load_scalar(const char* p, bool swap) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits;
  std::memcpy(&bits, p, sizeof(U));
  if (swap) bits = swap_bytes(bits);
  return std::bit_cast<T>(bits);
}

template <typename T>
void store_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = std::bit_cast<U>(value);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  char buf[sizeof(U)];
  std::memcpy(buf, &bits, sizeof(U));
  out.append(buf, sizeof(U));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

std::string encode_npy(const RowMatrix& m, Precision precision, bool one_dim) {
  const char* descr = precision == Precision::F32 ? "<f4" : "<f8";
  std::ostringstream dict;
  dict << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
  if (one_dim) {
    dict << m.size() << ",), }";
  } else {
    dict << m.rows() << ", " << m.cols() << "), }";
  }
  std::string header = dict.str();
  // magic(6) + version(2) + length(2) + dict + '\n' padded to 64 bytes.
  const std::size_t unpadded = kMagicLen + 4 + header.size() + 1;
  const std::size_t padded = (unpadded + 63) / 64 * 64;
  header.append(padded - unpadded, ' ');
  header.push_back('\n');

  std::string out;
  const std::size_t item = precision == Precision::F32 ? 4 : 8;
  out.reserve(padded + static_cast<std::size_t>(m.size()) * item);
  out.append(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  const auto len = static_cast<std::uint16_t>(header.size());
  out.push_back(static_cast<char>(len & 0xff));
  out.push_back(static_cast<char>(len >> 8));
  out += header;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (precision == Precision::F32) {
        store_le(out, static_cast<float>(m(r, c)));
      } else {
        store_le(out, m(r, c));
      }
    }
  }
  return out;
}

RowMatrix decode_npy(const std::string& bytes, bool allow_one_dim) {
  if (bytes.size() < kMagicLen + 4 || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    malformed("bad magic");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  std::size_t header_len = 0;
  std::size_t prefix = 0;
  if (major == 1 && minor == 0) {
    header_len = static_cast<unsigned char>(bytes[8]) |
                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    prefix = 10;
  } else if ((major == 2 || major == 3) && minor == 0) {
    if (bytes.size() < 12) malformed("truncated header");
    for (int i = 3; i >= 0; --i) {
      header_len = (header_len << 8) | static_cast<unsigned char>(bytes[8 + i]);
    }
    prefix = 12;
  } else {
    malformed("unsupported version " + std::to_string(major) + "." + std::to_string(minor));
  }
  if (bytes.size() < prefix + header_len) malformed("truncated header");
  const Header h = parse_header(std::string_view(bytes).substr(prefix, header_len));

  Index rows = 0;
  Index cols = 0;
  if (h.shape.size() == 2) {
    rows = h.shape[0];
    cols = h.shape[1];
  } else if (h.shape.size() == 1 && allow_one_dim) {
    rows = 1;
    cols = h.shape[0];
  } else {
    throw Error(ErrorCode::ShapeError,
                "expected a 2-dimensional tensor, got " + std::to_string(h.shape.size()) +
                    " dimensions");
  }

  const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  const std::size_t payload = bytes.size() - prefix - header_len;
  if (payload != count * h.item_size) {
    throw Error(ErrorCode::ShapeError, "NPY payload holds " + std::to_string(payload) +
                                           " bytes, shape needs " +
                                           std::to_string(count * h.item_size));
  }
  const bool swap = (h.byte_order == '<') != (std::endian::native == std::endian::little);
  const char* p = bytes.data() + prefix + header_len;

  RowMatrix m(rows, cols);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = h.item_size == 4 ? static_cast<double>(load_scalar<float>(p, swap))
                                      : load_scalar<double>(p, swap);
    p += h.item_size;
    const auto idx = static_cast<Index>(i);
    if (h.fortran_order) {
      m(idx % rows, idx / rows) = v;
    } else {
      m(idx / cols, idx % cols) = v;
    }
  }
  return m;
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot rename into " + path.string());
  }
}

EmbeddingMatrix read_tensor(const std::filesystem::path& path, Modality modality) {
  RowMatrix m = decode_npy(read_file(path));
  if (m.rows() < 1 || m.cols() < 1) {
    throw Error(ErrorCode::ShapeError, path.string() + " has an empty dimension");
  }
  require_finite(m, path.string());
  return EmbeddingMatrix{std::move(m), modality};
}

void write_tensor(const std::filesystem::path& path, const RowMatrix& m, Precision precision) {
  atomic_write(path, encode_npy(m, precision));
}

void write_vector(const std::filesystem::path& path, const Vector& v, Precision precision) {
  RowMatrix row = v.transpose();
  atomic_write(path, encode_npy(row, precision, /*one_dim=*/true));
}

Vector read_vector(const std::filesystem::path& path) {
  RowMatrix m = decode_npy(read_file(path), /*allow_one_dim=*/true);
  require_finite(m, path.string());
  if (m.rows() == 1) return m.row(0).transpose();
  if (m.cols() == 1) return m.col(0);
  throw Error(ErrorCode::ShapeError, path.string() + " is not a vector");
}

}  // namespace comet
