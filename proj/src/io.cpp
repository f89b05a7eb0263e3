#include "selfmvs/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace selfmvs::io {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Whitespace tokenizer that remembers byte offsets.
class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  bool next(std::string_view* tok) {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
    if (pos_ >= text_.size()) return false;
    const std::size_t begin = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    *tok = text_.substr(begin, pos_ - begin);
    last_offset_ = begin;
    return true;
  }
  std::size_t position() const { return pos_; }
  std::size_t last_offset() const { return last_offset_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t last_offset_ = 0;
};

template <typename T>
bool parse_number(std::string_view tok, T* out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, *out);
  return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
  // Shortest representation that parses back to the same double.
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v == 0.0 ? 0.0 : v);
  return std::string(buf, ptr);
}

std::uint32_t load_u32(const char* p, bool little) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  const bool native_little = std::endian::native == std::endian::little;
  if (little != native_little) v = __builtin_bswap32(v);
  return v;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

struct NetpbmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  std::size_t data_offset = 0;
};

NetpbmHeader parse_netpbm_header(std::string_view bytes, const fs::path& path) {
  NetpbmHeader h;
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < bytes.size()) {
      if (is_space(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto token = [&]() -> std::string_view {
    skip();
    const std::size_t b = pos;
    while (pos < bytes.size() && !is_space(bytes[pos])) ++pos;
    return bytes.substr(b, pos - b);
  };
  h.magic = std::string(token());
  int* fields[3] = {&h.width, &h.height, &h.maxval};
  for (int* f : fields) {
    const std::size_t at = pos;
    if (!parse_number(token(), f)) {
      throw ParseError("'" + path.string() + "': malformed netpbm header at byte " +
                       std::to_string(at));
    }
  }
  if (pos >= bytes.size()) {
    throw ParseError("'" + path.string() + "': truncated netpbm header");
  }
  h.data_offset = pos + 1;
  return h;
}

}  // namespace

std::string read_file(const fs::path& path) {
  auto in = open_in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// ---- PFM --------------------------------------------------------------------

std::string encode_pfm(const Grid<double>& map) {
  const auto H = map.rows();
  const auto W = map.cols();
  std::string out = "Pf\n" + std::to_string(W) + " " + std::to_string(H) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(H * W) * 4);
  char* p = out.data() + header;
  for (Eigen::Index r = H - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < W; ++c) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(map(r, c)));
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(p, &bits, 4);
      p += 4;
    }
  }
  return out;
}

Grid<double> decode_pfm(std::string_view bytes) {
  Tokenizer tok(bytes);
  std::string_view t;
  if (!tok.next(&t)) throw ParseError("PFM: empty input at byte 0");
  if (t == "PF") throw ParseError("PFM: color (PF) file where a grayscale map (Pf) is required");
  if (t != "Pf") throw ParseError("PFM: bad magic '" + std::string(t) + "' at byte 0");
  long width = 0, height = 0;
  double scale = 0.0;
  if (!tok.next(&t) || !parse_number(t, &width) || width <= 0) {
    throw ParseError("PFM: bad width at byte " + std::to_string(tok.last_offset()));
  }
  if (!tok.next(&t) || !parse_number(t, &height) || height <= 0) {
    throw ParseError("PFM: bad height at byte " + std::to_string(tok.last_offset()));
  }
  if (!tok.next(&t) || !parse_number(t, &scale) || scale == 0.0 || !std::isfinite(scale)) {
    throw ParseError("PFM: bad scale at byte " + std::to_string(tok.last_offset()));
  }
  // Exactly one whitespace byte separates the scale from the payload.
  const std::size_t data = tok.position() + 1;
  const std::size_t need = static_cast<std::size_t>(width) * height * 4;
  if (data > bytes.size() || bytes.size() - data < need) {
    throw ParseError("PFM: truncated payload at byte " + std::to_string(bytes.size()) +
                     " (expected " + std::to_string(need) + " data bytes from byte " +
                     std::to_string(data) + ")");
  }
  const bool little = scale < 0.0;
  Grid<double> map(height, width);
  const char* p = bytes.data() + data;
  for (long r = height - 1; r >= 0; --r) {
    for (long c = 0; c < width; ++c) {
      const float v = std::bit_cast<float>(load_u32(p, little));
      map(r, c) = std::isfinite(v) ? static_cast<double>(v) : 0.0;
      p += 4;
    }
  }
  return map;
}

void write_pfm(const fs::path& path, const Grid<double>& map) { write_file(path, encode_pfm(map)); }

Grid<double> read_pfm(const fs::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_pfm(bytes);
  } catch (const ParseError& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

// ---- Camera -----------------------------------------------------------------

std::string format_camera(const Camera& cam) {
  std::string out = "extrinsic\n";
  const Mat4& T = cam.world_to_camera();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out += format_double(T(r, c)) + (c < 3 ? " " : "\n");
  }
  out += "\nintrinsic\n";
  const Mat3& K = cam.K();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out += format_double(K(r, c)) + (c < 2 ? " " : "\n");
  }
  const DepthRange& d = cam.depth_range();
  out += "\n" + format_double(d.min) + " " + format_double(d.interval);
  // d_max can only follow a count, so an explicit max without a known count
  // gets the count implied by the spacing.
  if (d.count || d.explicit_max) {
    const int count = d.count ? *d.count
                              : std::max(2, static_cast<int>(std::lround((d.max - d.min) / d.interval)) + 1);
    out += " " + std::to_string(count);
  }
  if (d.explicit_max) out += " " + format_double(d.max);
  out += "\n";
  return out;
}

Camera parse_camera(std::string_view text, ImageSize size) {
  Tokenizer tok(text);
  std::string_view t;
  auto read_block = [&](const char* name, int n, double* out) {
    bool found = false;
    while (tok.next(&t)) {
      if (t == name) {
        found = true;
        break;
      }
    }
    if (!found) throw ParseError(std::string("camera: missing '") + name + "' section");
    for (int i = 0; i < n; ++i) {
      if (!tok.next(&t) || !parse_number(t, &out[i])) {
        throw ParseError(std::string("camera: '") + name + "' section needs " +
                         std::to_string(n) + " numbers (byte " +
                         std::to_string(tok.last_offset()) + ")");
      }
    }
  };
  double e[16], k[9];
  // Sections are located independently so a missing one is named exactly.
  {
    Tokenizer probe(text);
    bool has_ext = false, has_int = false;
    while (probe.next(&t)) {
      has_ext |= t == "extrinsic";
      has_int |= t == "intrinsic";
    }
    if (!has_ext) throw ParseError("camera: missing 'extrinsic' section");
    if (!has_int) throw ParseError("camera: missing 'intrinsic' section");
  }
  read_block("extrinsic", 16, e);
  read_block("intrinsic", 9, k);
  std::vector<double> depth_line;
  while (tok.next(&t)) {
    double v;
    if (!parse_number(t, &v)) {
      throw ParseError("camera: unexpected token '" + std::string(t) + "' in depth line (byte " +
                       std::to_string(tok.last_offset()) + ")");
    }
    depth_line.push_back(v);
  }
  if (depth_line.size() < 2 || depth_line.size() > 4) {
    throw ParseError("camera: depth line must be 'd_min interval [count d_max]'");
  }
  DepthRange range;
  range.min = depth_line[0];
  range.interval = depth_line[1];
  constexpr int kDefaultPlanes = 192;
  if (depth_line.size() >= 3) {
    const double c = depth_line[2];
    if (c < 2.0 || c != std::floor(c)) throw ParseError("camera: depth count must be an integer >= 2");
    range.count = static_cast<int>(c);
  }
  if (depth_line.size() == 4) {
    range.max = depth_line[3];
    range.explicit_max = true;
  } else {
    range.max = range.min + range.interval * ((range.count ? *range.count : kDefaultPlanes) - 1);
  }
  Mat4 T;
  Mat3 K;
  for (int i = 0; i < 16; ++i) T(i / 4, i % 4) = e[i];
  for (int i = 0; i < 9; ++i) K(i / 3, i % 3) = k[i];
  return Camera(K, T, size, range);
}

void write_camera(const fs::path& path, const Camera& cam) { write_file(path, format_camera(cam)); }

Camera read_camera(const fs::path& path, ImageSize size) {
  const std::string text = read_file(path);
  try {
    return parse_camera(text, size);
  } catch (const ParseError& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

// ---- pair.txt ---------------------------------------------------------------

std::string format_pairs(const ViewScoreMatrix& scores, int max_sources) {
  const int n = scores.size();
  std::string out = std::to_string(n) + "\n";
  for (int i = 0; i < n; ++i) {
    std::vector<int> ranked;
    if (n > 1) ranked = select_top_k(scores, i, n - 1);
    std::vector<int> kept;
    for (int j : ranked) {
      if (scores(i, j) <= 0.0) break;
      if (max_sources > 0 && static_cast<int>(kept.size()) == max_sources) break;
      kept.push_back(j);
    }
    out += std::to_string(i) + "\n" + std::to_string(kept.size());
    for (int j : kept) out += " " + std::to_string(j) + " " + format_double(scores(i, j));
    out += "\n";
  }
  return out;
}

ViewScoreMatrix parse_pairs(std::string_view text) {
  Tokenizer tok(text);
  std::string_view t;
  auto next_int = [&](const char* what) {
    long v;
    if (!tok.next(&t) || !parse_number(t, &v)) {
      throw ParseError(std::string("pair file: expected ") + what + " at byte " +
                       std::to_string(tok.last_offset()));
    }
    return v;
  };
  const long n = next_int("view count");
  if (n < 1) throw ParseError("pair file: view count must be >= 1");
  ViewScoreMatrix scores(static_cast<int>(n));
  for (long i = 0; i < n; ++i) {
    const long id = next_int("view id");
    if (id < 0 || id >= n) throw ParseError("pair file: view id " + std::to_string(id) + " out of range");
    const long k = next_int("source count");
    if (k < 0 || k > n - 1) throw ParseError("pair file: bad source count for view " + std::to_string(id));
    for (long m = 0; m < k; ++m) {
      const long j = next_int("source id");
      double s;
      if (!tok.next(&t) || !parse_number(t, &s) || !std::isfinite(s) || s < 0.0) {
        throw ParseError("pair file: bad score at byte " + std::to_string(tok.last_offset()));
      }
      if (j < 0 || j >= n || j == id) {
        throw ParseError("pair file: bad source id " + std::to_string(j) + " for view " + std::to_string(id));
      }
      scores.set(static_cast<int>(id), static_cast<int>(j), s);
    }
  }
  return scores;
}

void write_pairs(const fs::path& path, const ViewScoreMatrix& scores, int max_sources) {
  write_file(path, format_pairs(scores, max_sources));
}

ViewScoreMatrix read_pairs(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_pairs(text);
  } catch (const ParseError& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

// ---- Netpbm -----------------------------------------------------------------

void write_ppm(const fs::path& path, const Image& img) {
  const int C = img.num_channels();
  SELFMVS_CHECK(C == 1 || C == 3, "write_ppm: image must have 1 or 3 channels");
  std::string out = std::string(C == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      for (int ch = 0; ch < C; ++ch) {
        const double v = std::clamp(img[ch](r, c), 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0))));
      }
    }
  }
  write_file(path, out);
}

Image read_ppm(const fs::path& path) {
  const std::string bytes = read_file(path);
  const NetpbmHeader h = parse_netpbm_header(bytes, path);
  if (h.magic != "P6" && h.magic != "P5") {
    throw ParseError("'" + path.string() + "': expected binary PPM/PGM (P6/P5), got '" + h.magic + "'");
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 255) {
    throw ParseError("'" + path.string() + "': unsupported netpbm dimensions or maxval");
  }
  const int C = h.magic == "P6" ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * C;
  if (bytes.size() < h.data_offset + need) {
    throw ParseError("'" + path.string() + "': truncated pixel data at byte " +
                     std::to_string(bytes.size()));
  }
  Image img(h.height, h.width, C);
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data() + h.data_offset);
  for (int r = 0; r < h.height; ++r) {
    for (int c = 0; c < h.width; ++c) {
      for (int ch = 0; ch < C; ++ch) img[ch](r, c) = static_cast<double>(*p++) / h.maxval;
    }
  }
  return img;
}

void write_mask_pgm(const fs::path& path, const Mask& mask) {
  std::string out = "P5\n" + std::to_string(mask.cols()) + " " + std::to_string(mask.rows()) + "\n255\n";
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) out.push_back(mask(r, c) ? '\xff' : '\0');
  }
  write_file(path, out);
}

Mask read_mask_pgm(const fs::path& path) {
  const Image img = read_ppm(path);
  SELFMVS_CHECK(img.num_channels() == 1, "read_mask_pgm: mask must be single-channel");
  return img[0] > 0.5;
}

// ---- Anchors ----------------------------------------------------------------

void write_anchors(const fs::path& path, const std::vector<Anchor>& anchors, int n_views) {
  std::string out = std::to_string(anchors.size()) + " " + std::to_string(n_views) + "\n";
  for (const auto& a : anchors) {
    SELFMVS_CHECK(static_cast<int>(a.visible.size()) == n_views, "write_anchors: visibility length");
    out += format_double(a.position.x()) + " " + format_double(a.position.y()) + " " +
           format_double(a.position.z());
    for (bool v : a.visible) out += v ? " 1" : " 0";
    out += "\n";
  }
  write_file(path, out);
}

std::vector<Anchor> read_anchors(const fs::path& path) {
  const std::string text = read_file(path);
  Tokenizer tok(text);
  std::string_view t;
  auto fail = [&](const std::string& what) {
    return ParseError("'" + path.string() + "': " + what + " at byte " +
                      std::to_string(tok.last_offset()));
  };
  long n = 0, views = 0;
  if (!tok.next(&t) || !parse_number(t, &n) || n < 0) throw fail("bad anchor count");
  if (!tok.next(&t) || !parse_number(t, &views) || views < 1) throw fail("bad view count");
  std::vector<Anchor> anchors(static_cast<std::size_t>(n));
  for (auto& a : anchors) {
    for (int i = 0; i < 3; ++i) {
      if (!tok.next(&t) || !parse_number(t, &a.position[i])) throw fail("bad anchor coordinate");
    }
    a.visible.resize(static_cast<std::size_t>(views));
    for (long v = 0; v < views; ++v) {
      int flag = 0;
      if (!tok.next(&t) || !parse_number(t, &flag) || (flag != 0 && flag != 1)) {
        throw fail("bad visibility flag");
      }
      a.visible[static_cast<std::size_t>(v)] = flag == 1;
    }
  }
  return anchors;
}

// ---- Layout -----------------------------------------------------------------

std::string view_name(int view) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08d", view);
  return buf;
}

fs::path DatasetLayout::image(int view) const { return images_dir() / (view_name(view) + ".ppm"); }
fs::path DatasetLayout::depth(int view) const { return depths_dir() / (view_name(view) + ".pfm"); }
fs::path DatasetLayout::confidence(int view) const {
  return confidences_dir() / (view_name(view) + ".pfm");
}
fs::path DatasetLayout::mask(int view) const { return masks_dir() / (view_name(view) + ".pgm"); }
fs::path DatasetLayout::camera(int view) const {
  return cams_dir() / (view_name(view) + "_cam.txt");
}

int DatasetLayout::count_views() const {
  if (!fs::is_directory(root)) throw IoError("dataset directory '" + root.string() + "' does not exist");
  if (!fs::is_directory(cams_dir())) {
    throw IoError("dataset directory '" + root.string() + "' has no cams/ subdirectory");
  }
  int n = 0;
  while (fs::exists(camera(n))) ++n;
  return n;
}

void DatasetLayout::create_directories() const {
  std::error_code ec;
  for (const auto& d : {images_dir(), depths_dir(), confidences_dir(), masks_dir(), cams_dir()}) {
    fs::create_directories(d, ec);
    if (ec) throw IoError("cannot create '" + d.string() + "': " + ec.message());
  }
}

}  // namespace selfmvs::io
